//! Declarative analysis plans and layer-by-layer abstract propagation.
//!
//! A plan names the input space, its partition and distribution, then a list
//! of stages. Each stage consumes a run of network layers and names the space
//! and partition its output lives in. Multi-layer analysis is the composition
//! of the per-stage transformers; the gap to a direct lift of the whole prefix
//! is measured, not assumed.

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::abstraction::{
    build_A, grid_partition, identity_partition, sign_partition, zonotope_partition, Partition,
    Zonotope,
};
use crate::distribution::{tv_distance, Distribution};
use crate::domain::{PointSet, StateSpace};
use crate::error::{Error, Result};
use crate::lifting::{discretize, image_space, lift_function, GridSpec};
use crate::network::{Layer, Network};
use crate::scalar::{Decimal, Rational, Scalar};
use crate::transformer::{
    compose, exact_transformer, relu_sharp_between, sampled_transformer, AbstractTransformer,
    DEFAULT_SAMPLES,
};

pub const PLAN_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_ORACLE_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    /// Rational arithmetic; results are exact.
    Exact,
    #[default]
    Float,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SpaceSpec {
    Grid(GridSpec),
    Points(Vec<Vec<Decimal>>),
    /// Lattice points of a planar zonotope.
    Zonotope {
        center: Vec<Decimal>,
        #[serde(default)]
        generators: Vec<Vec<Decimal>>,
        lattice: Decimal,
    },
    /// The exact image of the previous space under the stage's layers.
    Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PartitionSpec {
    Sign,
    Identity,
    Grid {
        cell_size: Vec<Decimal>,
        anchor: Vec<Decimal>,
    },
    Zonotope {
        center: Vec<Decimal>,
        #[serde(default)]
        generators: Vec<Vec<Decimal>>,
        lattice: Decimal,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedPoint {
    pub point: Vec<Decimal>,
    pub mass: Decimal,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DistributionSpec {
    #[default]
    Uniform,
    Point(Vec<Decimal>),
    /// Masses on listed states, normalized after reading.
    Masses(Vec<WeightedPoint>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReluMode {
    /// Lift the ReLU like any other layer.
    #[default]
    Lifted,
    /// Use the sign rule between sign partitions.
    SignRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum TransformerMode {
    #[default]
    Exact,
    Sampled {
        #[serde(default = "default_samples")]
        k: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_budget() -> usize {
    DEFAULT_ORACLE_BUDGET
}

fn default_layers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub space: SpaceSpec,
    pub partition: PartitionSpec,
    #[serde(default)]
    pub distribution: DistributionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    #[serde(default = "default_layers")]
    pub layers: usize,
    pub space: SpaceSpec,
    pub partition: PartitionSpec,
    #[serde(default)]
    pub relu: ReluMode,
}

/// Analysis configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub format_version: u32,
    #[serde(default)]
    pub arithmetic: Arithmetic,
    pub input: InputSpec,
    pub stages: Vec<StageSpec>,
    #[serde(default)]
    pub transformer: TransformerMode,
    #[serde(default = "default_budget")]
    pub oracle_budget: usize,
}

impl PlanSpec {
    pub fn from_json(text: &[u8]) -> Result<Self> {
        let spec: PlanSpec = serde_json::from_slice(text).map_err(|e| {
            Error::parse(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        if spec.format_version != PLAN_FORMAT_VERSION {
            return Err(Error::parse(
                "format_version",
                format!(
                    "unsupported version {}, expected {PLAN_FORMAT_VERSION}",
                    spec.format_version
                ),
            ));
        }
        if spec.stages.is_empty() {
            return Err(Error::parse("stages", "plan has no stages"));
        }
        Ok(spec)
    }
}

fn rationals(v: &[Decimal]) -> Vec<Rational> {
    v.iter().map(|d| d.0).collect()
}

fn zonotope_of(center: &[Decimal], generators: &[Vec<Decimal>]) -> Result<Zonotope> {
    Zonotope::new(
        rationals(center),
        generators.iter().map(|g| rationals(g)).collect(),
    )
}

fn build_space(
    spec: &SpaceSpec,
    image_of: Option<(&Network<Rational>, &StateSpace)>,
) -> Result<StateSpace> {
    match spec {
        SpaceSpec::Grid(grid) => Ok(discretize(grid)?.into()),
        SpaceSpec::Points(points) => {
            let dim = points.first().map_or(0, Vec::len);
            Ok(PointSet::new(dim, points.iter().map(|p| rationals(p)).collect())?.into())
        }
        SpaceSpec::Zonotope {
            center,
            generators,
            lattice,
        } => {
            let z = zonotope_of(center, generators)?;
            let points = z.lattice_points(lattice.0)?;
            if points.is_empty() {
                return Err(Error::Config("zonotope contains no lattice point".into()));
            }
            Ok(PointSet::new(z.dim(), points)?.into())
        }
        SpaceSpec::Image => {
            let (net, prev) = image_of
                .ok_or_else(|| Error::Config("the input space cannot be an image".into()))?;
            Ok(image_space(|x: &[Rational]| net.eval(x), prev)?.into())
        }
    }
}

fn build_partition(spec: &PartitionSpec, space: &StateSpace) -> Result<Partition> {
    match spec {
        PartitionSpec::Sign => Ok(sign_partition(space)),
        PartitionSpec::Identity => Ok(identity_partition(space)),
        PartitionSpec::Grid { cell_size, anchor } => {
            grid_partition(space, &rationals(cell_size), &rationals(anchor))
        }
        PartitionSpec::Zonotope {
            center,
            generators,
            lattice,
        } => zonotope_partition(space, &zonotope_of(center, generators)?, lattice.0),
    }
}

/// One step of the analysis: a run of layers and the partitioned space its
/// output lives in.
#[derive(Debug, Clone)]
pub struct Stage {
    pub layers: Range<usize>,
    pub space: Arc<StateSpace>,
    pub partition: Arc<Partition>,
    pub relu: ReluMode,
}

/// A plan resolved against a network: concrete spaces, partitions and the
/// input distribution.
#[derive(Debug, Clone)]
pub struct Pipeline<S> {
    network: Network<S>,
    input_space: Arc<StateSpace>,
    input_partition: Arc<Partition>,
    input_distribution: Distribution<S>,
    stages: Vec<Stage>,
    mode: TransformerMode,
}

/// Distributions produced by one analysis run.
#[derive(Debug, Clone)]
pub struct AnalysisRun<S> {
    /// `A·d` over the input cells.
    pub abstract_input: Distribution<S>,
    /// Abstract distribution after each stage.
    pub stages: Vec<Distribution<S>>,
    pub transformers: Vec<AbstractTransformer<S>>,
}

impl<S> AnalysisRun<S> {
    pub fn output(&self) -> &Distribution<S> {
        self.stages
            .last()
            .expect("pipelines have at least one stage")
    }
}

/// Composed result against a direct lift of the whole prefix.
#[derive(Debug, Clone)]
pub struct PrecisionGap<S> {
    pub tv: S,
    pub composed: Distribution<S>,
    pub direct: Distribution<S>,
}

impl<S: Scalar> Pipeline<S> {
    /// Resolves `spec` against `network`, converting weights to `S`.
    pub fn from_spec(spec: &PlanSpec, network: &Network<f64>) -> Result<Self> {
        let exact_net = network.to_exact()?;
        let net: Network<S> = exact_net.map_scalar(|v| Ok(S::from_rational(v)))?;
        let input_space = Arc::new(build_space(&spec.input.space, None)?);
        if input_space.dim() != net.input_width() {
            return Err(Error::Config(format!(
                "input space has dimension {}, network expects {}",
                input_space.dim(),
                net.input_width()
            )));
        }
        let input_partition = Arc::new(build_partition(&spec.input.partition, &input_space)?);
        let input_distribution = build_distribution(&spec.input.distribution, &input_space)?;

        let mut stages = Vec::with_capacity(spec.stages.len());
        let mut cursor = 0usize;
        let mut prev_space = input_space.clone();
        for (i, stage) in spec.stages.iter().enumerate() {
            let end = cursor + stage.layers;
            if stage.layers == 0 || end > net.len() {
                return Err(Error::Config(format!(
                    "stage {i} needs layers {cursor}..{end} but the network has {}",
                    net.len()
                )));
            }
            let slice = exact_net.slice(cursor..end)?;
            let space = Arc::new(build_space(&stage.space, Some((&slice, &prev_space)))?);
            if space.dim() != slice.output_width() {
                return Err(Error::Config(format!(
                    "stage {i} space has dimension {}, layer output width is {}",
                    space.dim(),
                    slice.output_width()
                )));
            }
            let partition = Arc::new(build_partition(&stage.partition, &space)?);
            if stage.relu == ReluMode::SignRule
                && !(stage.layers == 1 && matches!(net.layers()[cursor], Layer::Relu { .. }))
            {
                return Err(Error::Config(format!(
                    "stage {i} uses the sign rule but is not a single relu layer"
                )));
            }
            stages.push(Stage {
                layers: cursor..end,
                space: space.clone(),
                partition,
                relu: stage.relu,
            });
            prev_space = space;
            cursor = end;
        }
        Ok(Pipeline {
            network: net,
            input_space,
            input_partition,
            input_distribution,
            stages,
            mode: spec.transformer,
        })
    }

    pub fn network(&self) -> &Network<S> {
        &self.network
    }

    /// The layers covered by the stages.
    pub fn prefix(&self) -> Result<Network<S>> {
        self.network
            .slice(0..self.stages.last().map_or(0, |s| s.layers.end))
    }

    pub fn input_space(&self) -> &Arc<StateSpace> {
        &self.input_space
    }

    pub fn input_partition(&self) -> &Arc<Partition> {
        &self.input_partition
    }

    pub fn input_distribution(&self) -> &Distribution<S> {
        &self.input_distribution
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn output_stage(&self) -> &Stage {
        self.stages
            .last()
            .expect("pipelines have at least one stage")
    }

    pub fn mode(&self) -> TransformerMode {
        self.mode
    }

    /// Same pipeline with a different transformer construction.
    pub fn with_mode(mut self, mode: TransformerMode) -> Self {
        self.mode = mode;
        self
    }

    /// Same pipeline with a different input distribution.
    pub fn with_input_distribution(mut self, d: Distribution<S>) -> Result<Self> {
        if d.domain_size() != self.input_space.len() {
            return Err(Error::DimensionMismatch {
                context: "input distribution",
                expected: self.input_space.len(),
                found: d.domain_size(),
            });
        }
        self.input_distribution = d;
        Ok(self)
    }

    /// One transformer per stage.
    pub fn transformers(&self) -> Result<Vec<AbstractTransformer<S>>> {
        let mut prev_space = &self.input_space;
        let mut prev_partition = &self.input_partition;
        let mut out = Vec::with_capacity(self.stages.len());
        for (i, stage) in self.stages.iter().enumerate() {
            let slice = self.network.slice(stage.layers.clone())?;
            let t = match (stage.relu, self.mode) {
                (ReluMode::SignRule, _) => {
                    relu_sharp_between(prev_partition.clone(), stage.partition.clone())?
                }
                (ReluMode::Lifted, TransformerMode::Exact) => {
                    let f = lift_function(|x: &[S]| slice.eval(x), prev_space, &stage.space)?;
                    exact_transformer(&f, prev_partition.clone(), stage.partition.clone())?
                }
                (ReluMode::Lifted, TransformerMode::Sampled { k, seed }) => sampled_transformer(
                    |x: &[S]| slice.eval(x),
                    prev_space,
                    prev_partition.clone(),
                    &stage.space,
                    stage.partition.clone(),
                    k,
                    seed.wrapping_add(i as u64),
                )?,
            };
            out.push(t);
            prev_space = &stage.space;
            prev_partition = &stage.partition;
        }
        Ok(out)
    }

    /// The whole analysis as a single transformer.
    pub fn composed_transformer(&self) -> Result<AbstractTransformer<S>> {
        let ts = self.transformers()?;
        let (first, rest) = ts.split_first().expect("pipelines have at least one stage");
        rest.iter()
            .try_fold(first.clone(), |acc, t| compose(&acc, t))
    }

    /// Propagates the plan's input distribution.
    pub fn run(&self) -> Result<AnalysisRun<S>> {
        self.run_from(&self.input_distribution)
    }

    /// Propagates `d` (over the input space) stage by stage.
    pub fn run_from(&self, d: &Distribution<S>) -> Result<AnalysisRun<S>> {
        let abstract_input = build_A(&self.input_partition)?.apply(d)?;
        let transformers = self.transformers()?;
        let mut stages = Vec::with_capacity(transformers.len());
        let mut current = abstract_input.clone();
        for t in &transformers {
            current = t.apply(&current)?;
            stages.push(current.clone());
        }
        Ok(AnalysisRun {
            abstract_input,
            stages,
            transformers,
        })
    }

    /// `A_out · lift(prefix) · d`: the abstraction of the exact pushforward,
    /// snapped once onto the output space.
    pub fn direct(&self, d: &Distribution<S>) -> Result<Distribution<S>> {
        let prefix = self.prefix()?;
        let out = self.output_stage();
        let f = lift_function(|x: &[S]| prefix.eval(x), &self.input_space, &out.space)?;
        build_A(&out.partition)?.apply(&f.apply(d)?)
    }

    pub fn precision_gap(&self, d: &Distribution<S>) -> Result<PrecisionGap<S>> {
        let composed = self.run_from(d)?.output().clone();
        let direct = self.direct(d)?;
        Ok(PrecisionGap {
            tv: tv_distance(&composed, &direct)?,
            composed,
            direct,
        })
    }
}

/// Gap between composed per-stage transformers and a direct lift of the
/// pipeline's prefix.
pub fn precision_gap<S: Scalar>(
    pipeline: &Pipeline<S>,
    d: &Distribution<S>,
) -> Result<PrecisionGap<S>> {
    pipeline.precision_gap(d)
}

fn build_distribution<S: Scalar>(
    spec: &DistributionSpec,
    space: &StateSpace,
) -> Result<Distribution<S>> {
    let locate = |p: &[Decimal]| -> Result<usize> {
        let exact = rationals(p);
        space.locate(&exact).map_err(|_| {
            Error::Config(format!(
                "distribution point {} is not a state of the input space",
                crate::domain::format_point(&exact)
            ))
        })
    };
    match spec {
        DistributionSpec::Uniform => Distribution::uniform(space.len()),
        DistributionSpec::Point(p) => Distribution::point_mass(space.len(), locate(p)?),
        DistributionSpec::Masses(list) => {
            let total: Rational = list.iter().map(|w| w.mass.0).sum();
            if list.is_empty() || total <= Rational::from_integer(0) {
                return Err(Error::Config("distribution masses must be positive".into()));
            }
            let entries = list
                .iter()
                .map(|w| Ok((locate(&w.point)?, S::from_rational(&(w.mass.0 / total)))))
                .collect::<Result<Vec<_>>>()?;
            Distribution::new(space.len(), entries)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::load_network;
    use crate::transformer::Provenance;

    const MLP: &str = r#"{"format_version": 1, "layers": [
        {"type": "dense", "weights": [[1, 1], [1, 1]], "bias": [0, 0]},
        {"type": "relu"},
        {"type": "dense", "weights": [[1, 1]], "bias": [0]}]}"#;

    fn plan(relu: &str, distribution: &str) -> PlanSpec {
        PlanSpec::from_json(
            format!(
                r#"{{"format_version": 1, "arithmetic": "exact",
                "input": {{"space": {{"grid": [{{"low": -3, "high": 3, "step": 1}}, {{"low": -3, "high": 3, "step": 1}}]}},
                           "partition": "sign", "distribution": {distribution}}},
                "stages": [{{"space": "image", "partition": "sign"}},
                           {{"space": "image", "partition": "sign", "relu": "{relu}"}}]}}"#
            )
            .as_bytes(),
        )
        .unwrap()
    }

    fn q(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn integer_mlp_reaches_four_sevenths() {
        let net = load_network(MLP.as_bytes()).unwrap();
        for relu in ["lifted", "sign_rule"] {
            let p = Pipeline::<Rational>::from_spec(&plan(relu, r#""uniform""#), &net).unwrap();
            let run = p.run().unwrap();
            let z = q(0, 1);
            assert_eq!(
                run.output().to_dense(),
                vec![z, z, z, z, q(4, 7), z, z, z, q(3, 7)],
                "{relu}"
            );
            let gap = p.precision_gap(p.input_distribution()).unwrap();
            assert_eq!(gap.tv, z);
            assert_eq!(run.stages[0].get(0), q(21, 49));
        }
    }

    #[test]
    fn concentrated_input_gap_is_measured() {
        let net = load_network(MLP.as_bytes()).unwrap();
        let spec = plan("lifted", r#"{"point": [-3, 3]}"#);
        let p = Pipeline::<Rational>::from_spec(&spec, &net).unwrap();
        let gap = p.precision_gap(p.input_distribution()).unwrap();
        // (−3, 3) sums to 0: the direct result is all mass on (0,0); the
        // composed result spreads the (−,+) cell uniformly first.
        assert_eq!(gap.direct.get(4), q(1, 1));
        assert_eq!(gap.composed.get(4), q(2, 3));
        assert_eq!(gap.tv, q(1, 3));
    }

    #[test]
    fn composed_transformer_matches_sequential_application() {
        let net = load_network(MLP.as_bytes()).unwrap();
        let p = Pipeline::<Rational>::from_spec(&plan("lifted", r#""uniform""#), &net).unwrap();
        let t = p.composed_transformer().unwrap();
        let a = build_A(p.input_partition()).unwrap();
        let out = t.apply(&a.apply(p.input_distribution()).unwrap()).unwrap();
        assert_eq!(&out, p.run().unwrap().output());
    }

    #[test]
    fn plan_errors() {
        let net = load_network(MLP.as_bytes()).unwrap();
        let mut spec = plan("sign_rule", r#""uniform""#);
        spec.stages[0].relu = ReluMode::SignRule;
        assert!(Pipeline::<f64>::from_spec(&spec, &net).is_err());
        let mut spec = plan("lifted", r#""uniform""#);
        spec.stages[1].layers = 5;
        assert!(Pipeline::<f64>::from_spec(&spec, &net).is_err());
        let mut spec = plan("lifted", r#""uniform""#);
        spec.input.space = SpaceSpec::Image;
        assert!(Pipeline::<f64>::from_spec(&spec, &net).is_err());
        assert!(
            PlanSpec::from_json(br#"{"format_version": 2, "input": {}, "stages": []}"#).is_err()
        );
        let err = PlanSpec::from_json(b"{\"format_version\": 1,\n \"bogus\": 1}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let spec = plan("lifted", r#"{"point": [9, 9]}"#);
        assert!(Pipeline::<f64>::from_spec(&spec, &net).is_err());
    }

    #[test]
    fn float_path_agrees_with_exact_path() {
        let net = load_network(MLP.as_bytes()).unwrap();
        let spec = plan(
            "lifted",
            r#"{"masses": [{"point": [1, 2], "mass": 1}, {"point": [-2, 0], "mass": 3}]}"#,
        );
        let exact = Pipeline::<Rational>::from_spec(&spec, &net)
            .unwrap()
            .run()
            .unwrap();
        let float = Pipeline::<f64>::from_spec(&spec, &net)
            .unwrap()
            .run()
            .unwrap();
        let tv = tv_distance(&exact.output().to_f64(), float.output()).unwrap();
        assert!(tv < 1e-12);
        assert_eq!(exact.output().get(8), q(1, 4));
    }

    #[test]
    fn sampled_mode_records_provenance() {
        let net = load_network(MLP.as_bytes()).unwrap();
        let p = Pipeline::<f64>::from_spec(&plan("lifted", r#""uniform""#), &net)
            .unwrap()
            .with_mode(TransformerMode::Sampled { k: 64, seed: 3 });
        let ts = p.transformers().unwrap();
        assert_eq!(ts[0].provenance(), Provenance::Sampled { k: 64, seed: 3 });
        assert_eq!(ts[1].provenance(), Provenance::Sampled { k: 64, seed: 4 });
        let total: f64 = p.run().unwrap().output().total();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
