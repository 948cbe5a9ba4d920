//! Binding a config to the core library: priors, constraint providers,
//! simulators, summaries and the samplers themselves.

use bcel_core::constraints::{
    ArchResiduals, ArchVariant, CompositeScore, ConstraintProvider, Dataset, GarchScore, GkPercentiles, Microsat,
    NormalMoments, Scenario, GK_DEFAULT_C,
};
use bcel_core::mathfn::RngStream;
use bcel_core::samplers::{
    abc_rejection, bcel_amis, bcel_basic, AbcConfig, AmisConfig, Distance, ElTarget, Mixture, PriorBlock, PriorSpec,
    SummaryStat, Tolerance, Transform, WeightedSample,
};
use bcel_core::simulate::{ArchSim, CoalescentSim, GarchSim, GkSim, NormalSim, ScenarioSpec, Simulator};

use crate::config::{
    ArchVariantKind, DataSource, DistanceKind, ExperimentConfig, MethodKind, MixtureKind, Model, PriorBlockConfig,
    TransformKind,
};
use crate::error::CliError;

fn scenario(model: Model) -> Option<Scenario> {
    match model {
        Model::PopGenA => Some(Scenario::A),
        Model::PopGenB => Some(Scenario::B),
        _ => None,
    }
}

/// Prior used when a config lists no `[[prior]]` blocks.
pub fn default_prior(model: Model) -> Vec<PriorBlockConfig> {
    let uniform = |lo: Vec<f64>, hi: Vec<f64>, transform| PriorBlockConfig::Uniform { lo, hi, transform };
    let simplex = || PriorBlockConfig::Dirichlet { alpha: vec![1.0; 3] };
    match model {
        Model::Normal => vec![uniform(vec![-5.0], vec![5.0], TransformKind::Identity)],
        Model::Gk => vec![uniform(vec![0.0; 4], vec![10.0; 4], TransformKind::Identity)],
        Model::Arch => vec![simplex()],
        Model::Garch => vec![PriorBlockConfig::Exponential { rate: 1.0 }, simplex()],
        Model::PopGenA => vec![uniform(vec![-1.0, -1.0], vec![1.5, 1.0], TransformKind::Log10)],
        Model::PopGenB => vec![uniform(vec![-1.0, -1.0, -1.0], vec![1.5, 1.0, 1.0], TransformKind::Log10)],
    }
}

pub fn prior(cfg: &ExperimentConfig) -> Result<PriorSpec, CliError> {
    let blocks = if cfg.prior.is_empty() { default_prior(cfg.model) } else { cfg.prior.clone() };
    let blocks = blocks
        .into_iter()
        .map(|b| match b {
            PriorBlockConfig::Uniform { lo, hi, transform } => PriorBlock::UniformBox {
                lo,
                hi,
                transform: match transform {
                    TransformKind::Identity => Transform::Identity,
                    TransformKind::Log10 => Transform::Log10,
                },
            },
            PriorBlockConfig::Exponential { rate } => PriorBlock::Exponential { rate },
            PriorBlockConfig::Dirichlet { alpha } => PriorBlock::Dirichlet { alpha },
        })
        .collect();
    let spec = PriorSpec::new(blocks).map_err(|e| CliError::Config(format!("prior: {e}")))?;
    if spec.dim() != cfg.model.dim() {
        return Err(CliError::Config(format!(
            "prior has dimension {}, model {} has {} parameters",
            spec.dim(),
            cfg.model,
            cfg.model.dim()
        )));
    }
    Ok(spec)
}

pub fn provider(cfg: &ExperimentConfig) -> Result<Box<dyn ConstraintProvider>, CliError> {
    let o = &cfg.options;
    Ok(match cfg.model {
        Model::Normal => Box::new(NormalMoments { order: o.moments.unwrap_or(1) }),
        Model::Gk => {
            let mut p = GkPercentiles::equispaced(o.percentiles.unwrap_or(3)).map_err(|e| CliError::Config(e.to_string()))?;
            p.c = o.gk_c.unwrap_or(GK_DEFAULT_C);
            Box::new(p)
        }
        Model::Arch => Box::new(ArchResiduals {
            variant: match o.arch_variant.unwrap_or(ArchVariantKind::Correlations) {
                ArchVariantKind::Moments => ArchVariant::Moments,
                ArchVariantKind::Correlations => ArchVariant::Correlations,
            },
        }),
        Model::Garch => Box::new(GarchScore),
        Model::PopGenA | Model::PopGenB => {
            let mut p = CompositeScore::with_defaults(scenario(cfg.model).expect("popgen model"));
            if let Some(same) = o.theta_same_pop_only {
                p.theta_same_pop_only = same;
            }
            Box::new(p)
        }
    })
}

/// Forward model with the sizes given in the config's simulate section.
pub fn simulator(cfg: &ExperimentConfig) -> Result<Box<dyn Simulator>, CliError> {
    let DataSource::Simulate { n, individuals_per_pop, loci, .. } = &cfg.data else {
        return Err(CliError::Config("a simulator needs data.source = \"simulate\"".into()));
    };
    let n = n.unwrap_or(0);
    Ok(match cfg.model {
        Model::Normal => Box::new(NormalSim { n }),
        Model::Gk => Box::new(GkSim { n, c: cfg.options.gk_c.unwrap_or(GK_DEFAULT_C) }),
        Model::Arch => Box::new(ArchSim { t: n }),
        Model::Garch => Box::new(GarchSim { t: n }),
        Model::PopGenA | Model::PopGenB => {
            let mut spec = ScenarioSpec::new(scenario(cfg.model).expect("popgen model"));
            spec.individuals_per_pop = individuals_per_pop.unwrap_or(spec.individuals_per_pop);
            spec.loci = loci.unwrap_or(spec.loci);
            if spec.individuals_per_pop == 0 || spec.loci == 0 {
                return Err(CliError::Config("individuals_per_pop and loci must be positive".into()));
            }
            Box::new(CoalescentSim { spec })
        }
    })
}

/// Forward model matching the shape of an observed dataset, for ABC on file data.
fn simulator_like(cfg: &ExperimentConfig, data: &Dataset) -> Result<Box<dyn Simulator>, CliError> {
    let n = data.len();
    Ok(match (cfg.model, data) {
        (Model::PopGenA | Model::PopGenB, Dataset::Microsat(m)) => {
            let genes = m.loci[0].demes.iter().filter(|d| **d == 1).count();
            if genes % 2 != 0 || m.loci.iter().any(|l| l.alleles.len() != genes * m.scenario.n_demes() as usize) {
                return Err(CliError::Config("ABC needs a balanced panel of diploid individuals".into()));
            }
            let spec = ScenarioSpec { scenario: m.scenario, individuals_per_pop: genes / 2, loci: m.loci.len() };
            Box::new(CoalescentSim { spec })
        }
        (Model::Normal, _) => Box::new(NormalSim { n }),
        (Model::Gk, _) => Box::new(GkSim { n, c: cfg.options.gk_c.unwrap_or(GK_DEFAULT_C) }),
        (Model::Arch, _) => Box::new(ArchSim { t: n }),
        (Model::Garch, _) => Box::new(GarchSim { t: n }),
        _ => return Err(CliError::Config(format!("data do not match model {}", cfg.model))),
    })
}

pub fn default_summary(model: Model) -> SummaryStat {
    match model {
        Model::Normal => SummaryStat::Mean,
        Model::Gk => SummaryStat::GkOctiles,
        Model::Arch => SummaryStat::ArchLeastSquares,
        Model::Garch => SummaryStat::GarchMle,
        Model::PopGenA | Model::PopGenB => SummaryStat::PopGen,
    }
}

pub fn abc_config(cfg: &ExperimentConfig) -> Result<AbcConfig, CliError> {
    let a = &cfg.abc;
    let summary = match &a.summary {
        Some(s) => s.parse().map_err(|e: bcel_core::Error| CliError::Config(e.to_string()))?,
        None => default_summary(cfg.model),
    };
    let tolerance = match a.epsilon {
        Some(eps) => Tolerance::Epsilon { eps, max_sims: a.max_sims },
        None => Tolerance::Quantile(a.quantile.unwrap_or(0.01)),
    };
    let distance = match a.distance {
        DistanceKind::Euclidean => Distance::Euclidean,
        DistanceKind::MahalanobisDiagonal => Distance::MahalanobisDiagonal,
    };
    Ok(AbcConfig { summary, distance, tolerance, m: a.m })
}

/// The configured dataset: simulated from `RngStream::new(data seed, 1)` or read from disk.
pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    match &cfg.data {
        DataSource::Simulate { truth, seed, .. } => {
            let stream = RngStream::new(seed.unwrap_or(cfg.seed), 1);
            Ok(simulator(cfg)?.simulate(&stream, truth)?)
        }
        DataSource::File { .. } => {
            let path = cfg.data_path().expect("file source");
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let wrap = |e: bcel_core::Error| CliError::Config(format!("{}: {e}", path.display()));
            let data = match cfg.model {
                Model::Normal | Model::Gk => Dataset::Iid(Dataset::parse_values(&text).map_err(wrap)?),
                Model::Arch | Model::Garch => Dataset::Series(Dataset::parse_values(&text).map_err(wrap)?),
                Model::PopGenA | Model::PopGenB => {
                    let m = Microsat::parse(&text).map_err(wrap)?;
                    if Some(m.scenario) != scenario(cfg.model) {
                        return Err(CliError::Config(format!("panel is scenario {}, model is {}", m.scenario, cfg.model)));
                    }
                    Dataset::Microsat(m)
                }
            };
            Ok(data)
        }
    }
}

/// Run one inference method on `data`.
pub fn run_method(
    cfg: &ExperimentConfig,
    method: MethodKind,
    data: &Dataset,
    stream: &RngStream,
) -> Result<WeightedSample, CliError> {
    let prior = prior(cfg)?;
    match method {
        MethodKind::Bcel | MethodKind::BcelAmis => {
            let provider = provider(cfg)?;
            let target = ElTarget::new(provider.as_ref(), data);
            let s = &cfg.sampler;
            if method == MethodKind::Bcel {
                return Ok(bcel_basic(stream, &prior, &target, s.m)?);
            }
            let mixture = match s.mixture {
                MixtureKind::Full => Mixture::Full,
                MixtureKind::PastOnly => Mixture::PastOnly,
            };
            Ok(bcel_amis(stream, &prior, &target, &AmisConfig { m: s.m, iterations: s.iterations, mixture })?)
        }
        MethodKind::Abc => {
            let sim = match cfg.data {
                DataSource::Simulate { .. } => simulator(cfg)?,
                DataSource::File { .. } => simulator_like(cfg, data)?,
            };
            Ok(abc_rejection(stream, &prior, sim.as_ref(), &abc_config(cfg)?, data)?)
        }
        MethodKind::Truth => {
            let truth = cfg.truth().ok_or_else(|| CliError::Config("method \"truth\" needs a known truth".into()))?;
            Ok(WeightedSample::unweighted(truth.len(), vec![truth.to_vec()]))
        }
    }
}
