#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "btac/activation.hpp"
#include "btac/connectivity.hpp"
#include "btac/simulate.hpp"

namespace btac {

/// Multiplicative overrides of the default hyperparameters (robustness
/// studies scale each by 0.01 / 1 / 100).
struct HyperScales {
  double a_lambda = 1.0, b_lambda = 1.0;
  double a_tau = 1.0, b_tau = 1.0;
  double a_sigma = 1.0, b_sigma = 1.0;
  double a_zeta = 1.0, b_zeta = 1.0;
};

struct ModelSpec {
  bool baseline = false;
  int rank = 1;
  std::string label() const;
  /// Chain tag entering the stream layout; 0 for the baseline.
  std::uint64_t tag() const { return baseline ? 0 : static_cast<std::uint64_t>(rank); }
};

struct RunConfig {
  std::vector<int> ranks{1};
  bool baseline = false;
  int iterations = 1100;
  int burnin = 100;
  int dic_stride = 4;
  std::uint64_t seed = 0;
  int workers = 1;
  int griddy_m = 50;
  int checkpoint_every = 100;
  HyperScales hyper_scales;

  void validate() const;
};

ShrinkageHyper make_hyper(int D, int R, const HyperScales& scales);
GraphicalHyper make_graphical_hyper(const HyperScales& scales);

/// Content digest (FNV-1a over dims, covariate and series bytes) binding
/// chains to the dataset they were fit on.
std::uint64_t dataset_hash(const Dataset& ds);

/// Prepared per-run data summaries.
struct EngineContext {
  DesignStats design;
  std::vector<RegionSuffStats> stats;
  Eigen::VectorXd voxcounts;
  std::int64_t total_cells = 0;
  std::uint64_t data_hash = 0;
};

EngineContext prepare_context(const Dataset& ds);

/// Full sampler state of one chain. Streams: 0 global, 1..G regions,
/// G+1..G+n subjects, each offset by the chain tag in the high bits.
struct SamplerState {
  ModelSpec model;
  std::vector<RegionActivation> regions;
  std::vector<RegionVectorized> vregions;
  ConnectivityState conn;
  double sigma_y2 = 1.0;
  std::vector<RngHandle> streams;
  std::vector<UpdateDiagnostics> region_diag;
  int iteration = 0;

  RngHandle& global_stream() { return streams[0]; }
  RngHandle& region_stream(int g) { return streams[1 + g]; }
  RngHandle& subject_stream(int G, int i) { return streams[1 + G + i]; }

  void save(std::ostream& os) const;
  static SamplerState load(std::istream& is, const Dataset& ds);
};

SamplerState init_sampler(const Dataset& ds, const ModelSpec& model,
                          const RunConfig& cfg,
                          const EngineContext* ctx = nullptr);

/// One full Gibbs sweep: per-region coefficient hierarchy (parallel over
/// regions), noise-variance barrier, per-subject effects (parallel over
/// subjects), then the graphical block. Deterministic for fixed seed
/// regardless of worker count.
void sweep(SamplerState& st, const EngineContext& ctx, const RunConfig& cfg);

/// Chain metadata; everything that defines the record layout plus the
/// reproducibility echo. Worker count and file paths are deliberately
/// excluded so chain files are bitwise identical across worker counts.
struct ChainMeta {
  int format_version = 1;
  bool baseline = false;
  int rank = 1;
  int n = 0, G = 0, T = 0, D = 0;
  std::vector<std::vector<int>> region_dims;
  int iterations = 0, burnin = 0, dic_stride = 4, griddy_m = 50;
  std::uint64_t seed = 0;
  HyperScales hyper_scales;
  std::uint64_t data_hash = 0;

  std::string label() const { return ModelSpec{baseline, rank}.label(); }
};

/// Record layout (offsets into one iteration's flat double record).
struct ChainLayout {
  std::vector<std::int64_t> coeff_offset;  // per region
  std::vector<std::int64_t> coeff_len;     // per region
  std::int64_t effects_offset = 0;         // n*G
  std::int64_t sigma_offset = 0;           // G*G
  std::int64_t phi_offset = 0;             // G*R (0 len for baseline)
  std::int64_t tau_offset = 0;             // G
  std::int64_t alpha_offset = 0;           // G (0 len for baseline)
  std::int64_t sigma_y2_offset = 0;
  std::int64_t zeta_offset = 0;
  std::int64_t record_len = 0;

  static ChainLayout from_meta(const ChainMeta& meta);
};

/// Thinned posterior storage: one flat record per iteration plus a
/// wall-clock sidecar (kept out of the serialized chain payload).
class ChainStore {
 public:
  ChainStore() = default;
  explicit ChainStore(ChainMeta meta);

  const ChainMeta& meta() const { return meta_; }
  const ChainLayout& layout() const { return layout_; }
  int iterations_recorded() const;
  int post_burnin() const { return iterations_recorded() - meta_.burnin; }

  void append(std::vector<double> record, double wall_seconds);
  std::span<const double> record(int s) const;
  std::span<double> mutable_record(int s);

  /// Composed coefficient tensor of region g at iteration s.
  DenseTensor composed_b(int s, int g) const;
  std::span<const double> coeff_raw(int s, int g) const;
  Eigen::MatrixXd effects(int s) const;
  Eigen::MatrixXd sigma(int s) const;
  double sigma_y2(int s) const;
  double zeta(int s) const;
  std::span<const double> tau(int s) const;
  std::span<const double> alpha(int s) const;
  std::span<const double> phi(int s) const;

  const std::vector<double>& wall_seconds() const { return wall_; }
  std::vector<double>& wall_seconds() { return wall_; }
  const std::vector<double>& buffer() const { return buf_; }

 private:
  ChainMeta meta_;
  ChainLayout layout_;
  std::vector<double> buf_;
  std::vector<double> wall_;
};

/// Record the current state of a chain into a flat record.
std::vector<double> make_record(const SamplerState& st);

/// Runs a full chain for one model. Throws EngineError with the failing
/// iteration attached on any mid-run error.
struct EngineError : std::runtime_error {
  int iteration = -1;
  EngineError(const std::string& msg, int iter);
};

using IterationHook = std::function<void(int iteration, const SamplerState& st,
                                         const ChainStore& chain)>;

ChainStore run_chain(const RunConfig& cfg, const Dataset& ds, const ModelSpec& model,
                     const IterationHook& hook = nullptr);

/// Gaussian log likelihood of every observed cell given composed
/// coefficients, effects and noise variance.
double log_likelihood(const Dataset& ds, const std::vector<DenseTensor>& b,
                      const Eigen::MatrixXd& effects, double sigma_y2);
double log_likelihood(const EngineContext& ctx, const std::vector<DenseTensor>& b,
                      const Eigen::MatrixXd& effects, double sigma_y2);

struct RankSweepResult {
  std::vector<ModelSpec> models;
  std::vector<ChainStore> chains;
  std::vector<double> dic;  // aligned with models
  int best_rank = 0;        // argmin DIC among tensor ranks
};

RankSweepResult fit_rank_sweep(const RunConfig& cfg, const Dataset& ds);

/// Static-partition worker pool used for region- and subject-level
/// fan-out; serial when workers <= 1.
void parallel_for(int n_tasks, int workers, const std::function<void(int)>& fn);

}  // namespace btac
