#include <benchmark/benchmark.h>

#include "metaglm/asymptotics.hpp"
#include "metaglm/combiners.hpp"
#include "metaglm/cspml.hpp"
#include "metaglm/glm.hpp"
#include "metaglm/pipeline.hpp"
#include "metaglm/rng.hpp"
#include "metaglm/simulation.hpp"

using namespace metaglm;

namespace {

GeneratedReplicate replicate() {
  static const GeneratedReplicate rep = generate(scenario_by_id(ScenarioId::I), 1, 0);
  return rep;
}

}  // namespace

static void BM_FitMle(benchmark::State& state) {
  const GeneratedReplicate rep = replicate();
  const Eigen::MatrixXd design = build_design(rep.internal);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_mle(design, rep.internal.outcome, Link::logit));
  }
}
BENCHMARK(BM_FitMle);

static void BM_FitCml(benchmark::State& state) {
  const GeneratedReplicate rep = replicate();
  const Eigen::MatrixXd design = build_design(rep.internal);
  const GlmFit internal = fit_mle(design, rep.internal.outcome, Link::logit);
  const IndexMap map = map_indices(rep.specs, rep.internal);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_cml(design, rep.internal.outcome, map.positions[2],
                                     rep.specs[2].coefficients, Link::logit, Link::logit,
                                     internal));
  }
}
BENCHMARK(BM_FitCml);

static void BM_EbCovariance(benchmark::State& state) {
  const GeneratedReplicate rep = replicate();
  const Eigen::MatrixXd design = build_design(rep.internal);
  const GlmFit internal = fit_mle(design, rep.internal.outcome, Link::logit);
  const IndexMap map = map_indices(rep.specs, rep.internal);
  std::vector<Eigen::MatrixXd> subs;
  std::vector<Eigen::VectorXd> betas;
  std::vector<Link> links;
  std::vector<Eigen::VectorXd> cml_points;
  for (std::size_t k = 0; k < rep.specs.size(); ++k) {
    subs.push_back(subdesign(design, map.positions[k]));
    betas.push_back(rep.specs[k].coefficients);
    links.push_back(Link::logit);
    cml_points.push_back(fit_cml(design, rep.internal.outcome, map.positions[k], betas[k],
                                 Link::logit, Link::logit, internal)
                             .gamma_cml);
  }
  const JointAsymptoticCov joint =
      joint_cov(estimate_blocks(design, subs, betas, internal.gamma_hat, Link::logit, links));
  const int draws = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(eb_covariance(joint, cml_points, internal.gamma_hat, draws, 7));
  }
}
BENCHMARK(BM_EbCovariance)->Arg(1000)->Arg(5000);

static void BM_SimplexQp(benchmark::State& state) {
  const auto k = static_cast<Eigen::Index>(state.range(0));
  rng::Substream stream(3, 1);
  Eigen::MatrixXd r(k, k);
  for (Eigen::Index i = 0; i < k; ++i) r.row(i) = stream.normals(k).transpose();
  const Eigen::MatrixXd q =
      r * r.transpose() / static_cast<double>(k) + 0.05 * Eigen::MatrixXd::Identity(k, k);
  for (auto _ : state) {
    benchmark::DoNotOptimize(simplex_qp(q));
  }
}
BENCHMARK(BM_SimplexQp)->Arg(3)->Arg(8)->Arg(12);

static void BM_FullReplicate(benchmark::State& state) {
  const GeneratedReplicate rep = replicate();
  PipelineOptions options;
  options.mc_draws = 2000;
  options.seed = 99;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_pipeline(rep.internal, rep.specs, options));
  }
}
BENCHMARK(BM_FullReplicate);

BENCHMARK_MAIN();
