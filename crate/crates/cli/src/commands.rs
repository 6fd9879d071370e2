//! One function per subcommand.

use std::io::Read;
use std::path::Path;

use pontryagin::colligation::Realization;
use pontryagin::corpus::{blaschke_example, generate, reciprocal_blaschke_example, CorpusSpec};
use pontryagin::dilation::{dilate, DilationKind};
use pontryagin::io::{load_system, matrix_to_json, Metadata, SystemFile};
use pontryagin::julia::julia_embedding;
use pontryagin::kernel::{admissibility_check, boundary_defect_check, negative_squares_estimate, SamplerConfig, Side};
use pontryagin::linalg::{DEFAULT_TOL, RANK_TOL};
use pontryagin::optimality::{
    compare_optimality_tol, defect_function_left, defect_function_right, kulma_check, sepontulos_check,
    unitary_similarity, ContainmentConfig, EnergyWitness, KulmaConfig, SimilarityOutcome, ENERGY_TOL, SIMILARITY_TOL,
};
use pontryagin::subspaces::{is_controllable, is_minimal, is_observable, is_simple, restrict_by_kind, RestrictionKind};
use pontryagin::{Colligation, SystemClass, C64};
use serde_json::{json, Value};

use crate::output::{CliError, Outcome};
use crate::{Command, ExampleName, Global, Input, Kind, Sampler, SideArg, Which};

pub fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Classify(_) => "classify",
        Command::Transfer { .. } => "transfer",
        Command::Markov { .. } => "markov",
        Command::Dual(_) => "dual",
        Command::Restrict { .. } => "restrict",
        Command::JuliaEmbed(_) => "julia-embed",
        Command::Dilate { .. } => "dilate",
        Command::Negsq { .. } => "negsq",
        Command::Admissible { .. } => "admissible",
        Command::Compare { .. } => "compare",
        Command::Similar { .. } => "similar",
        Command::Defect { .. } => "defect",
        Command::Sepontulos(_) => "sepontulos",
        Command::Kulma { .. } => "kulma",
        Command::Gen { .. } => "gen",
        Command::Example { .. } => "example",
        Command::BoundaryCheck { .. } => "boundary-check",
    }
}

fn read_text(path: Option<&Path>) -> Result<String, CliError> {
    let mut text = String::new();
    match path {
        Some(p) if p != Path::new("-") => {
            text =
                std::fs::read_to_string(p).map_err(|e| CliError::input("io_error", format!("{}: {e}", p.display())))?;
        }
        _ => {
            std::io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| CliError::input("io_error", format!("standard input: {e}")))?;
        }
    }
    Ok(text)
}

fn load(input: &Input) -> Result<(Colligation, Option<Metadata>), CliError> {
    Ok(load_system(&read_text(input.input.as_deref())?)?)
}

fn load_path(path: &Path) -> Result<Colligation, CliError> {
    Ok(load_system(&read_text(Some(path))?)?.0)
}

/// Carries the input name forward and records the step that produced the new system.
fn derived(sys: &Colligation, meta: Option<Metadata>, step: &str) -> Outcome {
    let meta = meta.unwrap_or_default();
    let provenance = match meta.provenance {
        Some(p) => format!("{p} | {step}"),
        None => step.to_string(),
    };
    let meta = Metadata { provenance: Some(provenance), ..meta };
    Outcome::System(SystemFile::from_colligation(sys, Some(meta)))
}

fn parse_point(s: &str) -> Result<C64, CliError> {
    let bad = || CliError::input("bad_parameter", format!("cannot parse point {s:?}; expected `re` or `re,im`"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(bad()),
    }
}

fn sampler(s: &Sampler, g: &Global) -> SamplerConfig {
    SamplerConfig { rounds: s.rounds, points_per_round: s.points, radius: s.radius, seed: g.seed.unwrap_or(0) }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn realization_json(r: &Realization) -> Value {
    json!({
        "state_dim": r.state_dim(),
        "input_dim": r.input.dim(),
        "output_dim": r.output.dim(),
        "A": matrix_to_json(&r.a),
        "B": matrix_to_json(&r.b),
        "C": matrix_to_json(&r.c),
        "D": matrix_to_json(&r.d),
    })
}

fn witness_json(w: &Option<EnergyWitness>) -> Value {
    match w {
        None => Value::Null,
        Some(w) => json!({
            "trial": w.trial,
            "first": w.first,
            "second": w.second,
            "inputs": w.inputs.iter().map(|u| u.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).collect::<Vec<_>>(),
        }),
    }
}

pub fn run(cmd: &Command, g: &Global) -> Result<Outcome, CliError> {
    let tol = g.tol.unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::input("bad_parameter", format!("tolerance must be positive, got {tol}")));
    }
    match cmd {
        Command::Classify(input) => {
            let (sys, _) = load(input)?;
            let cls = sys.classify_system(tol);
            let class = SystemClass::from_operator_class(&cls);
            let result = json!({
                "class": class.as_str(),
                "state_signature": [sys.state().pos_index(), sys.state().neg_index()],
                "controllable": is_controllable(&sys, RANK_TOL),
                "observable": is_observable(&sys, RANK_TOL),
                "simple": is_simple(&sys, RANK_TOL),
                "minimal": is_minimal(&sys, RANK_TOL),
                "operator": to_value(&cls),
            });
            Ok(Outcome::Report { passed: true, summary: class.as_str().to_string(), result })
        }
        Command::Transfer { input, z } => {
            let (sys, _) = load(input)?;
            let z = parse_point(z)?;
            let value = sys.transfer_eval(z)?;
            let result = json!({ "z": [z.re, z.im], "value": matrix_to_json(&value) });
            Ok(Outcome::Report { passed: true, summary: format!("theta({z}) computed"), result })
        }
        Command::Markov { input, n } => {
            let (sys, _) = load(input)?;
            let seq = sys.markov_parameters(*n);
            let result = json!({ "n": n, "parameters": seq.0.iter().map(matrix_to_json).collect::<Vec<_>>() });
            Ok(Outcome::Report { passed: true, summary: format!("{} Markov parameters", seq.len()), result })
        }
        Command::Dual(input) => {
            let (sys, meta) = load(input)?;
            Ok(derived(&sys.dual(), meta, "dual"))
        }
        Command::Restrict { input, which } => {
            let (sys, meta) = load(input)?;
            let kind = match which {
                Which::Controllable => RestrictionKind::Controllable,
                Which::Observable => RestrictionKind::Observable,
                Which::Simple => RestrictionKind::Simple,
                Which::Min1 => RestrictionKind::MinimalFirst,
                Which::Min2 => RestrictionKind::MinimalSecond,
            };
            let r = restrict_by_kind(&sys, kind, RANK_TOL)?;
            Ok(derived(&r, meta, &format!("restrict {which:?}").to_lowercase()))
        }
        Command::JuliaEmbed(input) => {
            let (sys, meta) = load(input)?;
            let je = julia_embedding(&sys, tol)?;
            Ok(derived(&je.extended, meta, "julia-embed"))
        }
        Command::Dilate { input, kind, depth } => {
            let (sys, meta) = load(input)?;
            let k = match kind {
                Kind::Conservative => DilationKind::Conservative,
                Kind::Isometric => DilationKind::Isometric,
                Kind::Coisometric => DilationKind::Coisometric,
            };
            let td = dilate(&sys, k, *depth, tol)?;
            Ok(derived(&td.dilated, meta, &format!("dilate {kind:?} depth {depth}").to_lowercase()))
        }
        Command::Negsq { input, sampler: s } => {
            let (sys, _) = load(input)?;
            let est = negative_squares_estimate(&sys, &sampler(s, g))?;
            let summary = format!(
                "kappa_hat = {}{}",
                est.kappa_hat,
                if est.stabilized { " (stabilized)" } else { " (not stabilized)" }
            );
            Ok(Outcome::Report { passed: true, summary, result: to_value(&est) })
        }
        Command::Admissible { input, sampler: s } => {
            let (sys, _) = load(input)?;
            let rep = admissibility_check(&sys, &sampler(s, g))?;
            let summary = format!(
                "{}: negative squares {} vs state index {}",
                if rep.admissible { "admissible" } else { "not admissible" },
                rep.kappa_hat,
                rep.neg_index
            );
            Ok(Outcome::Report { passed: rep.admissible, summary, result: to_value(&rep) })
        }
        Command::Compare { input, other, trials, horizon } => {
            let (sys, _) = load(input)?;
            let other = load_path(other)?;
            let seed = g.seed.unwrap_or(0);
            let cmp = compare_optimality_tol(&sys, &other, *trials, *horizon, seed, g.tol.unwrap_or(ENERGY_TOL))?;
            let result = json!({
                "order": cmp.order,
                "trials": cmp.trials,
                "horizon": cmp.horizon,
                "seed": cmp.seed,
                "first_above": cmp.first_above,
                "second_above": cmp.second_above,
                "max_gap": cmp.max_gap,
                "witness_first_above": witness_json(&cmp.witness_first_above),
                "witness_second_above": witness_json(&cmp.witness_second_above),
            });
            Ok(Outcome::Report { passed: true, summary: format!("energy order: {}", cmp.order.as_str()), result })
        }
        Command::Similar { input, other } => {
            let (sys, _) = load(input)?;
            let other = load_path(other)?;
            match unitary_similarity(&sys, &other, g.tol.unwrap_or(SIMILARITY_TOL))? {
                SimilarityOutcome::Similar(cert) => {
                    let result = json!({
                        "similar": true,
                        "u": matrix_to_json(&cert.u),
                        "residuals": to_value(&cert.residuals),
                    });
                    Ok(Outcome::Report { passed: true, summary: "unitarily similar".into(), result })
                }
                SimilarityOutcome::NotSimilar(rep) => {
                    let result = json!({
                        "similar": false,
                        "reason": rep.reason,
                        "residuals": rep.residuals.as_ref().map(to_value),
                        "intertwiner_exists": rep.intertwiner_exists,
                    });
                    Ok(Outcome::Report { passed: false, summary: format!("not similar: {}", rep.reason), result })
                }
            }
        }
        Command::Defect { input, side } => {
            let (sys, _) = load(input)?;
            let f = match side {
                SideArg::Right => defect_function_right(&sys, tol)?,
                SideArg::Left => defect_function_left(&sys, tol)?,
            };
            let width = f.width();
            let mut result = realization_json(&f.realization);
            result["side"] = to_value(&f.side);
            result["width"] = json!(width);
            let summary = if width == 0 { "width 0: identically zero".to_string() } else { format!("width {width}") };
            Ok(Outcome::Report { passed: true, summary, result })
        }
        Command::Sepontulos(input) => {
            let (sys, _) = load(input)?;
            let rep = sepontulos_check(&sys, &ContainmentConfig::default(), tol)?;
            let summary = format!(
                "{}: right defect {}, left defect {}",
                if rep.all_agree() { "all parts agree" } else { "disagreement" },
                if rep.phi_zero { "zero" } else { "nonzero" },
                if rep.psi_zero { "zero" } else { "nonzero" }
            );
            Ok(Outcome::Report { passed: rep.all_agree(), summary, result: to_value(&rep) })
        }
        Command::Kulma { input, sampler: s } => {
            let (sys, _) = load(input)?;
            let cfg = KulmaConfig { sampler: sampler(s, g), similarity_tol: SIMILARITY_TOL, seed: g.seed.unwrap_or(0) };
            let rep = kulma_check(&sys, &cfg, tol)?;
            let summary = format!(
                "{}: kappa {}, estimate {}, all similar {}",
                if rep.agree { "consistent" } else { "inconsistent" },
                rep.kappa,
                rep.estimate.kappa_hat,
                rep.all_similar
            );
            Ok(Outcome::Report { passed: rep.agree, summary, result: to_value(&rep) })
        }
        Command::Gen { spec, index } => {
            let text = read_text(Some(spec))?;
            let mut spec: CorpusSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::input("parse_error", format!("{}: {e}", spec.display())))?;
            if let Some(seed) = g.seed {
                spec.seed = seed;
            }
            let systems = generate(&spec);
            let file = |(i, s): (usize, &Colligation)| {
                let meta = Metadata {
                    name: Some(format!("{:?}-{i}", spec.target).to_lowercase()),
                    seed: Some(spec.seed),
                    provenance: Some(format!("gen entry {i}")),
                };
                SystemFile::from_colligation(s, Some(meta))
            };
            match index {
                Some(i) => {
                    let s = systems.get(*i).ok_or_else(|| {
                        CliError::input(
                            "bad_parameter",
                            format!("index {i} out of range for {} entries", systems.len()),
                        )
                    })?;
                    Ok(Outcome::System(file((*i, s))))
                }
                None => Ok(Outcome::Systems(systems.iter().enumerate().map(file).collect())),
            }
        }
        Command::Example { name, a } => {
            let (sys, label) = match name {
                ExampleName::Blaschke => (blaschke_example(*a)?, "blaschke"),
                ExampleName::RecipBlaschke => (reciprocal_blaschke_example(*a)?, "recip-blaschke"),
            };
            let meta = Metadata {
                name: Some(format!("{label}({a})")),
                seed: None,
                provenance: Some(format!("example {label} a={a}")),
            };
            Ok(Outcome::System(SystemFile::from_colligation(&sys, Some(meta))))
        }
        Command::BoundaryCheck { input, grid } => {
            let (sys, _) = load(input)?;
            let phi = defect_function_right(&sys, tol)?;
            let psi = defect_function_left(&sys, tol)?;
            let right =
                boundary_defect_check(&sys, (phi.width() > 0).then_some(&phi.realization), Side::Right, *grid, tol)?;
            let left =
                boundary_defect_check(&sys, (psi.width() > 0).then_some(&psi.realization), Side::Left, *grid, tol)?;
            let passed = right.passed && left.passed;
            let summary = format!(
                "{}: smallest eigenvalue {:e} (right), {:e} (left)",
                if passed { "passed" } else { "failed" },
                right.min_eig,
                left.min_eig
            );
            let result = json!({ "passed": passed, "right": to_value(&right), "left": to_value(&left) });
            Ok(Outcome::Report { passed, summary, result })
        }
    }
}
