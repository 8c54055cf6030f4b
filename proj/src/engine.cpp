#include "btac/engine.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <mutex>
#include <thread>

#include "btac/postprocess.hpp"

namespace btac {

std::string ModelSpec::label() const {
  return baseline ? "vectorized" : "rank" + std::to_string(rank);
}

void RunConfig::validate() const {
  if (ranks.empty() && !baseline)
    throw std::invalid_argument("RunConfig: need at least one rank or the baseline");
  for (int r : ranks)
    if (r < 1) throw std::invalid_argument("RunConfig: rank must be >= 1");
  if (iterations < 1) throw std::invalid_argument("RunConfig: iterations must be >= 1");
  if (burnin < 0 || burnin >= iterations)
    throw std::invalid_argument("RunConfig: need 0 <= burnin < iterations");
  if (dic_stride < 1) throw std::invalid_argument("RunConfig: dic stride must be >= 1");
  if (workers < 1) throw std::invalid_argument("RunConfig: workers must be >= 1");
  if (griddy_m < 1) throw std::invalid_argument("RunConfig: griddy_m must be >= 1");
  if (checkpoint_every < 0)
    throw std::invalid_argument("RunConfig: checkpoint_every must be >= 0");
  const HyperScales& s = hyper_scales;
  for (double v : {s.a_lambda, s.b_lambda, s.a_tau, s.b_tau, s.a_sigma, s.b_sigma,
                   s.a_zeta, s.b_zeta})
    if (!(v > 0.0)) throw std::invalid_argument("RunConfig: hyper scales must be > 0");
}

ShrinkageHyper make_hyper(int D, int R, const HyperScales& s) {
  ShrinkageHyper h = ShrinkageHyper::defaults(D, R);
  h.a_lambda *= s.a_lambda;
  h.b_lambda *= s.b_lambda;
  h.a_tau *= s.a_tau;
  h.b_tau *= s.b_tau;
  h.a_sigma *= s.a_sigma;
  h.b_sigma *= s.b_sigma;
  return h;
}

GraphicalHyper make_graphical_hyper(const HyperScales& s) {
  GraphicalHyper h;
  h.a_zeta *= s.a_zeta;
  h.b_zeta *= s.b_zeta;
  return h;
}

namespace {
inline void fnv_mix(std::uint64_t& h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
}
}  // namespace

std::uint64_t dataset_hash(const Dataset& ds) {
  std::uint64_t h = 1469598103934665603ull;
  const std::int32_t header[4] = {ds.n, ds.T, ds.G, ds.D};
  fnv_mix(h, header, sizeof(header));
  for (const auto& dims : ds.region_dims)
    fnv_mix(h, dims.data(), dims.size() * sizeof(int));
  fnv_mix(h, ds.covariate.data(), ds.covariate.size() * sizeof(double));
  for (const auto& subj : ds.y)
    for (const auto& series : subj)
      fnv_mix(h, series.data(), series.size() * sizeof(double));
  return h;
}

EngineContext prepare_context(const Dataset& ds) {
  EngineContext ctx;
  ctx.design = compute_design_stats(ds);
  ctx.stats.reserve(ds.G);
  ctx.voxcounts = Eigen::VectorXd::Zero(ds.G);
  for (int g = 0; g < ds.G; ++g) {
    ctx.stats.push_back(compute_region_stats(ds, g));
    ctx.voxcounts[g] = static_cast<double>(ctx.stats.back().vox);
    ctx.total_cells += static_cast<std::int64_t>(ds.n) * ds.T * ctx.stats.back().vox;
  }
  ctx.data_hash = dataset_hash(ds);
  return ctx;
}

namespace {
// largest per-cell least-squares magnitude, used to seed the coefficient
// initialization at the data scale
double region_init_scale(const RegionSuffStats& rs, const DesignStats& ds, int D) {
  const double den = static_cast<double>(ds.n) * ds.sxx;
  if (!(den > 0.0)) return 0.01;
  double peak = 0.0;
  for (double v : rs.yx) peak = std::max(peak, std::abs(v) / den);
  if (!(peak > 0.0)) return 0.01;
  return std::max(0.01, std::pow(peak, 1.0 / D));
}
}  // namespace

SamplerState init_sampler(const Dataset& ds, const ModelSpec& model,
                          const RunConfig& cfg, const EngineContext* ctx) {
  SamplerState st;
  st.model = model;
  const int G = ds.G, n = ds.n;
  const std::uint64_t base = model.tag() << 32;
  st.streams.reserve(1 + G + n);
  for (int k = 0; k < 1 + G + n; ++k)
    st.streams.emplace_back(cfg.seed, base | static_cast<std::uint64_t>(k));
  st.region_diag.assign(G, UpdateDiagnostics{});

  auto scale_for = [&](int g) {
    if (!ctx) return 0.01;
    return region_init_scale(ctx->stats[g], ctx->design,
                             model.baseline ? 1 : ds.D);
  };
  if (model.baseline) {
    const ShrinkageHyper hyper = make_hyper(ds.D, 1, cfg.hyper_scales);
    st.vregions.reserve(G);
    for (int g = 0; g < G; ++g)
      st.vregions.push_back(init_region_vectorized(
          ds.region_dims[g], hyper, st.region_stream(g), scale_for(g)));
  } else {
    const ShrinkageHyper hyper = make_hyper(ds.D, model.rank, cfg.hyper_scales);
    st.regions.reserve(G);
    for (int g = 0; g < G; ++g)
      st.regions.push_back(init_region_activation(ds.region_dims[g], model.rank,
                                                  hyper, st.region_stream(g),
                                                  scale_for(g)));
  }
  st.conn = init_connectivity(n, G, make_graphical_hyper(cfg.hyper_scales));
  st.sigma_y2 = 1.0;
  st.iteration = 0;
  return st;
}

void parallel_for(int n_tasks, int workers, const std::function<void(int)>& fn) {
  if (n_tasks <= 0) return;
  const int w = std::min(workers, n_tasks);
  if (w <= 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  pool.reserve(w);
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&, t]() {
      for (int i = t; i < n_tasks; i += w) {
        if (failed.load(std::memory_order_relaxed)) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

void sweep(SamplerState& st, const EngineContext& ctx, const RunConfig& cfg) {
  const int G = static_cast<int>(ctx.stats.size());
  const int n = ctx.design.n;
  const int D = st.model.baseline
                    ? static_cast<int>(st.vregions.front().dims.size())
                    : st.regions.front().order();
  const ShrinkageHyper hyper =
      make_hyper(D, st.model.baseline ? 1 : st.model.rank, cfg.hyper_scales);
  const GraphicalHyper ghyper = make_graphical_hyper(cfg.hyper_scales);

  // column sums of the current effects, one per region
  std::vector<double> d_sum(G, 0.0);
  for (int g = 0; g < G; ++g) d_sum[g] = st.conn.effects.col(g).sum();

  // activation block, regions fan out
  std::vector<DenseTensor> composed(G);
  parallel_for(G, cfg.workers, [&](int g) {
    RngHandle& rng = st.region_stream(g);
    if (st.model.baseline) {
      update_vectorized_region(st.vregions[g], ctx.stats[g], ctx.design, d_sum[g],
                               st.sigma_y2, hyper, rng);
      composed[g] = vectorized_composed(st.vregions[g]);
      return;
    }
    RegionActivation& reg = st.regions[g];
    const int R = reg.rank();
    update_alpha_griddy(reg, hyper, cfg.griddy_m, rng, &st.region_diag[g]);
    for (int r = 0; r < R - 1; ++r) update_xi_mh(reg, r, rng);
    update_tau(reg, hyper, rng, &st.region_diag[g]);
    for (int j = 0; j < reg.order(); ++j)
      for (int r = 0; r < R; ++r) update_lambda(reg, hyper, j, r, rng);
    for (int j = 0; j < reg.order(); ++j)
      for (int r = 0; r < R; ++r)
        for (int l = 0; l < reg.dims()[j]; ++l) update_omega(reg, j, r, l, rng);
    for (int j = 0; j < reg.order(); ++j)
      for (int r = 0; r < R; ++r)
        update_margin(reg, ctx.stats[g], ctx.design, d_sum[g], st.sigma_y2, j, r, rng);
    composed[g] = reg.composed();
  });

  // noise-variance barrier: needs every region's current residuals
  double rss = 0.0;
  for (int g = 0; g < G; ++g) {
    const auto& e = st.conn.effects;
    std::vector<double> d_col(n);
    for (int i = 0; i < n; ++i) d_col[i] = e(i, g);
    rss += region_rss(composed[g], ctx.stats[g], ctx.design, d_col);
  }
  st.sigma_y2 = update_sigma_y(hyper, rss, ctx.total_cells, st.global_stream());

  // subject effects
  Eigen::MatrixXd resid_sums(n, G);
  for (int g = 0; g < G; ++g) {
    double b_sum = 0.0;
    for (std::int64_t v = 0; v < composed[g].size(); ++v) b_sum += composed[g][v];
    for (int i = 0; i < n; ++i)
      resid_sums(i, g) = ctx.stats[g].subj_sum[i] - b_sum * ctx.design.sx;
  }
  Eigen::MatrixXd prec =
      effects_precision(st.conn.sigma, ctx.voxcounts, ctx.design.T, st.sigma_y2);
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("sweep: effects precision not PD");
  parallel_for(n, cfg.workers, [&](int i) {
    st.conn.effects.row(i) = draw_effect(llt, resid_sums.row(i).transpose(),
                                         st.sigma_y2, st.subject_stream(G, i))
                                 .transpose();
  });

  // graphical block, sequential by construction. zeta's conditional
  // marginalizes the latent scales, so it must precede their redraw for
  // the (zeta, upsilon) block to be one exact joint draw given sigma.
  const Eigen::MatrixXd scatter = compute_scatter(st.conn.effects);
  for (int g = 0; g < G; ++g)
    update_precision_column(st.conn, scatter, n, g, st.global_stream());
  update_zeta(st.conn, ghyper, st.global_stream());
  update_latent_scales(st.conn, st.global_stream());

  ++st.iteration;
}

ChainLayout ChainLayout::from_meta(const ChainMeta& meta) {
  ChainLayout lay;
  const int G = meta.G;
  std::int64_t off = 0;
  lay.coeff_offset.resize(G);
  lay.coeff_len.resize(G);
  for (int g = 0; g < G; ++g) {
    std::int64_t len;
    if (meta.baseline) {
      len = cell_count(meta.region_dims[g]);
    } else {
      std::int64_t p = 0;
      for (int d : meta.region_dims[g]) p += d;
      len = static_cast<std::int64_t>(meta.rank) * p;
    }
    lay.coeff_offset[g] = off;
    lay.coeff_len[g] = len;
    off += len;
  }
  lay.effects_offset = off;
  off += static_cast<std::int64_t>(meta.n) * G;
  lay.sigma_offset = off;
  off += static_cast<std::int64_t>(G) * G;
  lay.phi_offset = off;
  off += meta.baseline ? 0 : static_cast<std::int64_t>(G) * meta.rank;
  lay.tau_offset = off;
  off += G;
  lay.alpha_offset = off;
  off += meta.baseline ? 0 : G;
  lay.sigma_y2_offset = off;
  off += 1;
  lay.zeta_offset = off;
  off += 1;
  lay.record_len = off;
  return lay;
}

ChainStore::ChainStore(ChainMeta meta)
    : meta_(std::move(meta)), layout_(ChainLayout::from_meta(meta_)) {}

int ChainStore::iterations_recorded() const {
  return layout_.record_len == 0
             ? 0
             : static_cast<int>(buf_.size() / static_cast<std::size_t>(layout_.record_len));
}

void ChainStore::append(std::vector<double> record, double wall_seconds) {
  if (static_cast<std::int64_t>(record.size()) != layout_.record_len)
    throw std::invalid_argument("ChainStore::append: record length mismatch");
  buf_.insert(buf_.end(), record.begin(), record.end());
  wall_.push_back(wall_seconds);
}

std::span<const double> ChainStore::record(int s) const {
  return {buf_.data() + static_cast<std::size_t>(s) * layout_.record_len,
          static_cast<std::size_t>(layout_.record_len)};
}

std::span<double> ChainStore::mutable_record(int s) {
  return {buf_.data() + static_cast<std::size_t>(s) * layout_.record_len,
          static_cast<std::size_t>(layout_.record_len)};
}

std::span<const double> ChainStore::coeff_raw(int s, int g) const {
  auto rec = record(s);
  return rec.subspan(static_cast<std::size_t>(layout_.coeff_offset[g]),
                     static_cast<std::size_t>(layout_.coeff_len[g]));
}

DenseTensor ChainStore::composed_b(int s, int g) const {
  const auto raw = coeff_raw(s, g);
  const auto& dims = meta_.region_dims[g];
  if (meta_.baseline)
    return DenseTensor(dims, std::vector<double>(raw.begin(), raw.end()));
  ParafacCoeff c(dims, meta_.rank);
  std::size_t pos = 0;
  for (std::size_t j = 0; j < dims.size(); ++j)
    for (int r = 0; r < meta_.rank; ++r) {
      auto m = c.margin(static_cast<int>(j), r);
      for (auto& v : m) v = raw[pos++];
    }
  return c.compose();
}

Eigen::MatrixXd ChainStore::effects(int s) const {
  auto rec = record(s);
  Eigen::MatrixXd e(meta_.n, meta_.G);
  std::size_t pos = layout_.effects_offset;
  for (int i = 0; i < meta_.n; ++i)
    for (int g = 0; g < meta_.G; ++g) e(i, g) = rec[pos++];
  return e;
}

Eigen::MatrixXd ChainStore::sigma(int s) const {
  auto rec = record(s);
  Eigen::MatrixXd m(meta_.G, meta_.G);
  std::size_t pos = layout_.sigma_offset;
  for (int a = 0; a < meta_.G; ++a)
    for (int b = 0; b < meta_.G; ++b) m(a, b) = rec[pos++];
  return m;
}

double ChainStore::sigma_y2(int s) const { return record(s)[layout_.sigma_y2_offset]; }
double ChainStore::zeta(int s) const { return record(s)[layout_.zeta_offset]; }

std::span<const double> ChainStore::tau(int s) const {
  return record(s).subspan(layout_.tau_offset, meta_.G);
}

std::span<const double> ChainStore::alpha(int s) const {
  return record(s).subspan(layout_.alpha_offset,
                           meta_.baseline ? 0 : static_cast<std::size_t>(meta_.G));
}

std::span<const double> ChainStore::phi(int s) const {
  return record(s).subspan(
      layout_.phi_offset,
      meta_.baseline ? 0 : static_cast<std::size_t>(meta_.G) * meta_.rank);
}

std::vector<double> make_record(const SamplerState& st) {
  const int G = st.model.baseline ? static_cast<int>(st.vregions.size())
                                  : static_cast<int>(st.regions.size());
  std::vector<double> rec;
  // coefficients
  if (st.model.baseline) {
    for (int g = 0; g < G; ++g)
      rec.insert(rec.end(), st.vregions[g].coeff.begin(), st.vregions[g].coeff.end());
  } else {
    for (int g = 0; g < G; ++g) {
      const auto& reg = st.regions[g];
      for (int j = 0; j < reg.order(); ++j)
        for (int r = 0; r < reg.rank(); ++r) {
          auto m = reg.coeff.margin(j, r);
          rec.insert(rec.end(), m.begin(), m.end());
        }
    }
  }
  const auto& e = st.conn.effects;
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index g = 0; g < e.cols(); ++g) rec.push_back(e(i, g));
  for (int a = 0; a < G; ++a)
    for (int b = 0; b < G; ++b) rec.push_back(st.conn.sigma(a, b));
  if (!st.model.baseline)
    for (int g = 0; g < G; ++g)
      rec.insert(rec.end(), st.regions[g].phi.begin(), st.regions[g].phi.end());
  for (int g = 0; g < G; ++g)
    rec.push_back(st.model.baseline ? st.vregions[g].tau : st.regions[g].tau);
  if (!st.model.baseline)
    for (int g = 0; g < G; ++g) rec.push_back(st.regions[g].alpha);
  rec.push_back(st.sigma_y2);
  rec.push_back(st.conn.zeta);
  return rec;
}

EngineError::EngineError(const std::string& msg, int iter)
    : std::runtime_error(msg + " (iteration " + std::to_string(iter) + ")"),
      iteration(iter) {}

namespace {
void check_record_finite(const std::vector<double>& rec, int iter) {
  for (double v : rec)
    if (!std::isfinite(v))
      throw EngineError("non-finite value in chain record", iter);
}
}  // namespace

ChainStore run_chain(const RunConfig& cfg, const Dataset& ds, const ModelSpec& model,
                     const IterationHook& hook) {
  cfg.validate();
  EngineContext ctx = prepare_context(ds);
  SamplerState st = init_sampler(ds, model, cfg, &ctx);

  ChainMeta meta;
  meta.baseline = model.baseline;
  meta.rank = model.rank;
  meta.n = ds.n;
  meta.G = ds.G;
  meta.T = ds.T;
  meta.D = ds.D;
  meta.region_dims = ds.region_dims;
  meta.iterations = cfg.iterations;
  meta.burnin = cfg.burnin;
  meta.dic_stride = cfg.dic_stride;
  meta.griddy_m = cfg.griddy_m;
  meta.seed = cfg.seed;
  meta.hyper_scales = cfg.hyper_scales;
  meta.data_hash = ctx.data_hash;
  ChainStore chain(meta);

  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      sweep(st, ctx, cfg);
    } catch (const EngineError&) {
      throw;
    } catch (const std::exception& e) {
      throw EngineError(e.what(), it);
    }
    std::vector<double> rec = make_record(st);
    check_record_finite(rec, it);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    chain.append(std::move(rec), secs);
    if (hook) hook(it, st, chain);
  }
  return chain;
}

double log_likelihood(const EngineContext& ctx, const std::vector<DenseTensor>& b,
                      const Eigen::MatrixXd& effects, double sigma_y2) {
  if (!(sigma_y2 > 0.0))
    throw std::invalid_argument("log_likelihood: sigma_y2 must be positive");
  if (b.size() != ctx.stats.size())
    throw std::invalid_argument("log_likelihood: region count mismatch");
  double rss = 0.0;
  const int n = ctx.design.n;
  std::vector<double> d_col(n);
  for (std::size_t g = 0; g < ctx.stats.size(); ++g) {
    for (int i = 0; i < n; ++i) d_col[i] = effects(i, static_cast<int>(g));
    rss += region_rss(b[g], ctx.stats[g], ctx.design, d_col);
  }
  const double N = static_cast<double>(ctx.total_cells);
  return -0.5 * N * std::log(2.0 * std::numbers::pi * sigma_y2) -
         rss / (2.0 * sigma_y2);
}

double log_likelihood(const Dataset& ds, const std::vector<DenseTensor>& b,
                      const Eigen::MatrixXd& effects, double sigma_y2) {
  return log_likelihood(prepare_context(ds), b, effects, sigma_y2);
}

RankSweepResult fit_rank_sweep(const RunConfig& cfg, const Dataset& ds) {
  cfg.validate();
  RankSweepResult out;
  for (int r : cfg.ranks) out.models.push_back(ModelSpec{false, r});
  if (cfg.baseline) out.models.push_back(ModelSpec{true, 1});

  EngineContext ctx = prepare_context(ds);
  double best = std::numeric_limits<double>::infinity();
  for (const ModelSpec& model : out.models) {
    out.chains.push_back(run_chain(cfg, ds, model));
    out.dic.push_back(dic(out.chains.back(), ctx, cfg.dic_stride));
    if (!model.baseline && out.dic.back() < best) {
      best = out.dic.back();
      out.best_rank = model.rank;
    }
  }
  return out;
}

// --- sampler state serialization (checkpoint/resume) ---

namespace {
void put_doubles(std::ostream& os, std::span<const double> v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}
void get_doubles(std::istream& is, std::span<double> v) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
}
}  // namespace

void SamplerState::save(std::ostream& os) const {
  const int G = model.baseline ? static_cast<int>(vregions.size())
                               : static_cast<int>(regions.size());
  os << "btacstate 1 " << (model.baseline ? 1 : 0) << ' ' << model.rank << ' ' << G
     << ' ' << conn.subjects() << ' ' << iteration << '\n';
  for (const auto& s : streams) {
    s.save(os);
    os << '\n';
  }
  os.put('|');  // sentinel separating the text section from the binary blob
  std::vector<double> blob;
  if (model.baseline) {
    for (const auto& reg : vregions) {
      blob.insert(blob.end(), reg.coeff.begin(), reg.coeff.end());
      blob.insert(blob.end(), reg.omega.begin(), reg.omega.end());
      blob.push_back(reg.lambda);
      blob.push_back(reg.tau);
    }
  } else {
    for (const auto& reg : regions) {
      for (int j = 0; j < reg.order(); ++j)
        for (int r = 0; r < reg.rank(); ++r) {
          auto m = reg.coeff.margin(j, r);
          blob.insert(blob.end(), m.begin(), m.end());
        }
      blob.insert(blob.end(), reg.xi.begin(), reg.xi.end());
      blob.push_back(reg.tau);
      blob.insert(blob.end(), reg.lambda.begin(), reg.lambda.end());
      for (const auto& w : reg.omega) blob.insert(blob.end(), w.begin(), w.end());
      blob.push_back(static_cast<double>(reg.alpha_index));
      blob.push_back(reg.alpha);
    }
  }
  for (Eigen::Index i = 0; i < conn.effects.rows(); ++i)
    for (Eigen::Index g = 0; g < conn.effects.cols(); ++g)
      blob.push_back(conn.effects(i, g));
  for (Eigen::Index a = 0; a < conn.sigma.rows(); ++a)
    for (Eigen::Index b = 0; b < conn.sigma.cols(); ++b) {
      blob.push_back(conn.sigma(a, b));
      blob.push_back(conn.upsilon(a, b));
    }
  blob.push_back(conn.zeta);
  blob.push_back(sigma_y2);
  const std::uint64_t len = blob.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  put_doubles(os, blob);
}

SamplerState SamplerState::load(std::istream& is, const Dataset& ds) {
  std::string magic;
  int version = 0, baseline = 0, rank = 0, G = 0, n = 0, iter = 0;
  is >> magic >> version >> baseline >> rank >> G >> n >> iter;
  if (magic != "btacstate" || version != 1 || !is)
    throw std::runtime_error("SamplerState::load: bad header");
  if (G != ds.G || n != ds.n)
    throw std::runtime_error("SamplerState::load: dataset shape mismatch");

  SamplerState st;
  st.model = ModelSpec{baseline != 0, rank};
  st.iteration = iter;
  st.streams.resize(1 + G + n);
  for (auto& s : st.streams) s.load(is);
  st.region_diag.assign(G, UpdateDiagnostics{});

  // skip to the sentinel that opens the binary blob
  char c = 0;
  while (is.get(c) && c != '|') {
  }
  if (c != '|') throw std::runtime_error("SamplerState::load: missing blob sentinel");
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::vector<double> blob(len);
  get_doubles(is, blob);
  if (!is) throw std::runtime_error("SamplerState::load: truncated state blob");

  std::size_t pos = 0;
  auto take = [&](std::size_t k) {
    const std::size_t p = pos;
    pos += k;
    if (pos > blob.size()) throw std::runtime_error("SamplerState::load: blob overrun");
    return p;
  };

  if (st.model.baseline) {
    st.vregions.resize(G);
    for (int g = 0; g < G; ++g) {
      auto& reg = st.vregions[g];
      reg.dims = ds.region_dims[g];
      const auto V = static_cast<std::size_t>(cell_count(reg.dims));
      const std::size_t pc = take(V);
      reg.coeff.assign(blob.begin() + pc, blob.begin() + pc + V);
      const std::size_t pw = take(V);
      reg.omega.assign(blob.begin() + pw, blob.begin() + pw + V);
      reg.lambda = blob[take(1)];
      reg.tau = blob[take(1)];
    }
  } else {
    st.regions.resize(G);
    for (int g = 0; g < G; ++g) {
      auto& reg = st.regions[g];
      reg.coeff = ParafacCoeff(ds.region_dims[g], rank);
      const int D = reg.order();
      for (int j = 0; j < D; ++j)
        for (int r = 0; r < rank; ++r) {
          auto m = reg.coeff.margin(j, r);
          const std::size_t p = take(m.size());
          for (std::size_t l = 0; l < m.size(); ++l) m[l] = blob[p + l];
        }
      reg.xi.resize(std::max(rank - 1, 0));
      for (auto& x : reg.xi) x = blob[take(1)];
      reg.tau = blob[take(1)];
      reg.lambda.resize(static_cast<std::size_t>(D) * rank);
      for (auto& l : reg.lambda) l = blob[take(1)];
      reg.omega.resize(static_cast<std::size_t>(D) * rank);
      for (int j = 0; j < D; ++j)
        for (int r = 0; r < rank; ++r) {
          auto& w = reg.omega[static_cast<std::size_t>(j) * rank + r];
          const auto len = static_cast<std::size_t>(ds.region_dims[g][j]);
          const std::size_t pw = take(len);
          w.assign(blob.begin() + pw, blob.begin() + pw + len);
        }
      reg.alpha_index = static_cast<int>(blob[take(1)]);
      reg.alpha = blob[take(1)];
      reg.refresh_phi();
      reg.refresh_rank1();
    }
  }
  st.conn = init_connectivity(n, G, GraphicalHyper{});
  for (int i = 0; i < n; ++i)
    for (int g = 0; g < G; ++g) st.conn.effects(i, g) = blob[take(1)];
  for (int a = 0; a < G; ++a)
    for (int b = 0; b < G; ++b) {
      st.conn.sigma(a, b) = blob[take(1)];
      st.conn.upsilon(a, b) = blob[take(1)];
    }
  st.conn.zeta = blob[take(1)];
  st.sigma_y2 = blob[take(1)];
  if (pos != blob.size())
    throw std::runtime_error("SamplerState::load: trailing state bytes");
  return st;
}

}  // namespace btac
