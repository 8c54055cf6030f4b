#include "btac/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <limits>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace btac::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kChainMagic[8] = {'B', 'T', 'A', 'C', 'C', 'H', 'N', '1'};
constexpr char kStateMagic[8] = {'B', 'T', 'A', 'C', 'S', 'T', 'T', '1'};

void write_doubles(std::ostream& os, std::span<const double> v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_blob(const fs::path& path, std::int64_t expect_doubles) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open blob " + path.string());
  in.seekg(0, std::ios::end);
  const std::int64_t bytes = in.tellg();
  if (bytes != expect_doubles * static_cast<std::int64_t>(sizeof(double)))
    throw std::runtime_error("blob " + path.string() + " has " +
                             std::to_string(bytes) + " bytes, expected " +
                             std::to_string(expect_doubles * 8));
  in.seekg(0);
  std::vector<double> out(expect_doubles);
  in.read(reinterpret_cast<char*>(out.data()), bytes);
  if (!in) throw std::runtime_error("short read on blob " + path.string());
  return out;
}

void write_blob(const fs::path& path, std::span<const double> v) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write blob " + path.string());
  write_doubles(out, v);
  if (!out) throw std::runtime_error("short write on blob " + path.string());
}

double parse_double(const std::string& field, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field, "not a number: '" + text + "'");
  }
}

std::int64_t parse_int(const std::string& field, const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field, "not an integer: '" + text + "'");
  }
}

bool parse_bool(const std::string& field, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(field, "not a boolean: '" + text + "'");
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

json hyper_scales_json(const HyperScales& s) {
  return json{{"a_lambda", s.a_lambda}, {"b_lambda", s.b_lambda},
              {"a_tau", s.a_tau},       {"b_tau", s.b_tau},
              {"a_sigma", s.a_sigma},   {"b_sigma", s.b_sigma},
              {"a_zeta", s.a_zeta},     {"b_zeta", s.b_zeta}};
}

HyperScales hyper_scales_from_json(const json& j) {
  HyperScales s;
  s.a_lambda = j.at("a_lambda");
  s.b_lambda = j.at("b_lambda");
  s.a_tau = j.at("a_tau");
  s.b_tau = j.at("b_tau");
  s.a_sigma = j.at("a_sigma");
  s.b_sigma = j.at("b_sigma");
  s.a_zeta = j.at("a_zeta");
  s.b_zeta = j.at("b_zeta");
  return s;
}

}  // namespace

KvConfig parse_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  KvConfig kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error(path.string() + ": empty key");
    if (kv.count(key))
      throw std::runtime_error(path.string() + ": duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

std::vector<int> parse_rank_list(const std::string& text) {
  std::vector<int> ranks;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int lo = static_cast<int>(parse_int("ranks", trim(text.substr(0, dots))));
    const int hi = static_cast<int>(parse_int("ranks", trim(text.substr(dots + 2))));
    if (lo < 1 || hi < lo) throw ConfigError("ranks", "bad range '" + text + "'");
    for (int r = lo; r <= hi; ++r) ranks.push_back(r);
    return ranks;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    ranks.push_back(static_cast<int>(parse_int("ranks", item)));
  }
  if (ranks.empty()) throw ConfigError("ranks", "empty rank list");
  return ranks;
}

std::vector<ConnectedPair> parse_pairs(const std::string& text) {
  std::vector<ConnectedPair> pairs;
  if (trim(text).empty() || trim(text) == "none") return pairs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dash = item.find('-');
    const auto colon = item.find(':');
    if (dash == std::string::npos || colon == std::string::npos || colon < dash)
      throw ConfigError("pairs", "expected 'a-b:rho', got '" + item + "'");
    ConnectedPair p;
    p.a = static_cast<int>(parse_int("pairs", trim(item.substr(0, dash))));
    p.b = static_cast<int>(parse_int("pairs", trim(item.substr(dash + 1, colon - dash - 1))));
    p.rho = parse_double("pairs", trim(item.substr(colon + 1)));
    pairs.push_back(p);
  }
  return pairs;
}

SimSpec sim_spec_from_config(const KvConfig& kv, std::uint64_t* seed_out) {
  SimSpec spec;
  std::uint64_t seed = 0;
  for (const auto& [key, value] : kv) {
    if (key == "n") spec.n = static_cast<int>(parse_int(key, value));
    else if (key == "T") spec.T = static_cast<int>(parse_int(key, value));
    else if (key == "G") spec.G = static_cast<int>(parse_int(key, value));
    else if (key == "D") spec.D = static_cast<int>(parse_int(key, value));
    else if (key == "period") spec.period = static_cast<int>(parse_int(key, value));
    else if (key == "poisson_rate") spec.poisson_rate = parse_double(key, value);
    else if (key == "cnr") spec.cnr = parse_double(key, value);
    else if (key == "snr") spec.snr = parse_double(key, value);
    else if (key == "sigma_y2") spec.sigma_y2 = parse_double(key, value);
    else if (key == "activation_cap") spec.activation_cap = parse_double(key, value);
    else if (key == "pairs") spec.pairs = parse_pairs(value);
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "hrf_response_delay") spec.hrf.response_delay = parse_double(key, value);
    else if (key == "hrf_undershoot_delay") spec.hrf.undershoot_delay = parse_double(key, value);
    else if (key == "hrf_response_dispersion") spec.hrf.response_dispersion = parse_double(key, value);
    else if (key == "hrf_undershoot_dispersion") spec.hrf.undershoot_dispersion = parse_double(key, value);
    else if (key == "hrf_undershoot_scale") spec.hrf.undershoot_scale = parse_double(key, value);
    else if (key == "hrf_kernel_length") spec.hrf_kernel_length = static_cast<int>(parse_int(key, value));
    else throw ConfigError(key, "unknown simulate key");
  }
  if (spec.n < 1) throw ConfigError("n", "must be >= 1");
  if (spec.T < 1) throw ConfigError("T", "must be >= 1");
  if (spec.G < 1) throw ConfigError("G", "must be >= 1");
  if (spec.D < 1) throw ConfigError("D", "must be >= 1");
  if (spec.period < 1 || spec.period > spec.T)
    throw ConfigError("period", "need 1 <= period <= T");
  if (!(spec.cnr > 0.0)) throw ConfigError("cnr", "must be > 0");
  if (!(spec.snr > 0.0)) throw ConfigError("snr", "must be > 0");
  if (spec.sigma_y2 < 0.0) throw ConfigError("sigma_y2", "must be >= 0");
  if (!(spec.activation_cap > 0.0 && spec.activation_cap < 1.0))
    throw ConfigError("activation_cap", "must be in (0,1)");
  for (const auto& p : spec.pairs)
    if (p.a < 0 || p.b < 0 || p.a >= spec.G || p.b >= spec.G || p.a == p.b ||
        std::abs(p.rho) >= 1.0)
      throw ConfigError("pairs", "invalid pair specification");
  if (seed_out) *seed_out = seed;
  return spec;
}

RunConfig run_config_from_config(const KvConfig& kv) {
  RunConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "ranks") cfg.ranks = parse_rank_list(value);
    else if (key == "baseline") cfg.baseline = parse_bool(key, value);
    else if (key == "iterations") cfg.iterations = static_cast<int>(parse_int(key, value));
    else if (key == "burnin") cfg.burnin = static_cast<int>(parse_int(key, value));
    else if (key == "thin_dic") cfg.dic_stride = static_cast<int>(parse_int(key, value));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "workers") cfg.workers = static_cast<int>(parse_int(key, value));
    else if (key == "griddy_m") cfg.griddy_m = static_cast<int>(parse_int(key, value));
    else if (key == "checkpoint_every") cfg.checkpoint_every = static_cast<int>(parse_int(key, value));
    else if (key == "scale_a_lambda") cfg.hyper_scales.a_lambda = parse_double(key, value);
    else if (key == "scale_b_lambda") cfg.hyper_scales.b_lambda = parse_double(key, value);
    else if (key == "scale_a_tau") cfg.hyper_scales.a_tau = parse_double(key, value);
    else if (key == "scale_b_tau") cfg.hyper_scales.b_tau = parse_double(key, value);
    else if (key == "scale_a_sigma") cfg.hyper_scales.a_sigma = parse_double(key, value);
    else if (key == "scale_b_sigma") cfg.hyper_scales.b_sigma = parse_double(key, value);
    else if (key == "scale_a_zeta") cfg.hyper_scales.a_zeta = parse_double(key, value);
    else if (key == "scale_b_zeta") cfg.hyper_scales.b_zeta = parse_double(key, value);
    else throw ConfigError(key, "unknown fit key");
  }
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError("run", e.what());
  }
  return cfg;
}

// --- dataset ---

void write_dataset(const fs::path& dir, const Dataset& ds,
                   const std::string& config_echo) {
  fs::create_directories(dir);
  json manifest;
  manifest["format_version"] = "btac-dataset-1";
  manifest["n"] = ds.n;
  manifest["T"] = ds.T;
  manifest["G"] = ds.G;
  manifest["D"] = ds.D;
  manifest["region_dims"] = ds.region_dims;
  manifest["covariate"] = "x.bin";
  manifest["config_echo"] = config_echo;

  write_blob(dir / "x.bin", ds.covariate);
  std::vector<std::vector<std::string>> series(ds.n, std::vector<std::string>(ds.G));
  for (int i = 0; i < ds.n; ++i)
    for (int g = 0; g < ds.G; ++g) {
      const std::string name =
          "y_s" + std::to_string(i) + "_r" + std::to_string(g) + ".bin";
      write_blob(dir / name, ds.y[i][g]);
      series[i][g] = name;
    }
  manifest["series"] = series;

  if (ds.truth.present) {
    json truth;
    std::vector<std::string> bnames;
    for (int g = 0; g < ds.G; ++g) {
      const std::string name = "truth_b_r" + std::to_string(g) + ".bin";
      write_blob(dir / name, ds.truth.coeff[g].data());
      bnames.push_back(name);
    }
    truth["coeff"] = bnames;
    std::vector<double> d_flat;
    for (int i = 0; i < ds.n; ++i)
      for (int g = 0; g < ds.G; ++g) d_flat.push_back(ds.truth.effects(i, g));
    write_blob(dir / "truth_d.bin", d_flat);
    truth["effects"] = "truth_d.bin";
    std::vector<double> p_flat;
    for (int a = 0; a < ds.G; ++a)
      for (int b = 0; b < ds.G; ++b) p_flat.push_back(ds.truth.precision(a, b));
    write_blob(dir / "truth_prec.bin", p_flat);
    truth["precision"] = "truth_prec.bin";
    manifest["truth"] = truth;
  } else {
    manifest["truth"] = nullptr;
  }

  manifest["hash"] = dataset_hash(ds);  // convenience echo; recomputed on read
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
}

Dataset read_dataset(const fs::path& dir_or_manifest) {
  fs::path manifest_path = dir_or_manifest;
  if (fs::is_directory(manifest_path)) manifest_path /= "manifest.json";
  const fs::path dir = manifest_path.parent_path();
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open " + manifest_path.string());
  json manifest = json::parse(in);
  if (!manifest.contains("format_version") ||
      manifest["format_version"] != "btac-dataset-1")
    throw std::runtime_error("unsupported dataset format version");

  Dataset ds;
  ds.n = manifest.at("n");
  ds.T = manifest.at("T");
  ds.G = manifest.at("G");
  ds.D = manifest.at("D");
  ds.region_dims = manifest.at("region_dims").get<std::vector<std::vector<int>>>();
  ds.covariate = read_blob(dir / manifest.at("covariate").get<std::string>(), ds.T);

  const auto series = manifest.at("series").get<std::vector<std::vector<std::string>>>();
  ds.y.assign(ds.n, std::vector<std::vector<double>>(ds.G));
  for (int i = 0; i < ds.n; ++i)
    for (int g = 0; g < ds.G; ++g)
      ds.y[i][g] = read_blob(dir / series.at(i).at(g),
                             static_cast<std::int64_t>(ds.T) * ds.region_size(g));

  if (!manifest.at("truth").is_null()) {
    const json& truth = manifest.at("truth");
    ds.truth.present = true;
    const auto bnames = truth.at("coeff").get<std::vector<std::string>>();
    for (int g = 0; g < ds.G; ++g)
      ds.truth.coeff.emplace_back(ds.region_dims[g],
                                  read_blob(dir / bnames.at(g), ds.region_size(g)));
    std::vector<double> d_flat =
        read_blob(dir / truth.at("effects").get<std::string>(),
                  static_cast<std::int64_t>(ds.n) * ds.G);
    ds.truth.effects = Eigen::MatrixXd(ds.n, ds.G);
    for (int i = 0; i < ds.n; ++i)
      for (int g = 0; g < ds.G; ++g) ds.truth.effects(i, g) = d_flat[i * ds.G + g];
    std::vector<double> p_flat =
        read_blob(dir / truth.at("precision").get<std::string>(),
                  static_cast<std::int64_t>(ds.G) * ds.G);
    ds.truth.precision = Eigen::MatrixXd(ds.G, ds.G);
    for (int a = 0; a < ds.G; ++a)
      for (int b = 0; b < ds.G; ++b) ds.truth.precision(a, b) = p_flat[a * ds.G + b];
  }
  return ds;
}

// --- chain files ---

namespace {

json meta_to_json(const ChainMeta& meta) {
  json j;
  j["format_version"] = meta.format_version;
  j["baseline"] = meta.baseline;
  j["rank"] = meta.rank;
  j["n"] = meta.n;
  j["G"] = meta.G;
  j["T"] = meta.T;
  j["D"] = meta.D;
  j["region_dims"] = meta.region_dims;
  j["iterations"] = meta.iterations;
  j["burnin"] = meta.burnin;
  j["dic_stride"] = meta.dic_stride;
  j["griddy_m"] = meta.griddy_m;
  j["seed"] = meta.seed;
  j["hyper_scales"] = hyper_scales_json(meta.hyper_scales);
  j["data_hash"] = meta.data_hash;
  return j;
}

ChainMeta meta_from_json(const json& j) {
  ChainMeta meta;
  meta.format_version = j.at("format_version");
  if (meta.format_version != 1)
    throw std::runtime_error("unsupported chain format version");
  meta.baseline = j.at("baseline");
  meta.rank = j.at("rank");
  meta.n = j.at("n");
  meta.G = j.at("G");
  meta.T = j.at("T");
  meta.D = j.at("D");
  meta.region_dims = j.at("region_dims").get<std::vector<std::vector<int>>>();
  meta.iterations = j.at("iterations");
  meta.burnin = j.at("burnin");
  meta.dic_stride = j.at("dic_stride");
  meta.griddy_m = j.at("griddy_m");
  meta.seed = j.at("seed");
  meta.hyper_scales = hyper_scales_from_json(j.at("hyper_scales"));
  meta.data_hash = j.at("data_hash");
  return meta;
}

struct ChainHeader {
  ChainMeta meta;
  std::int64_t header_bytes = 0;
};

ChainHeader read_chain_header(std::ifstream& in, const fs::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kChainMagic, 8) != 0)
    throw std::runtime_error(path.string() + ": not a chain file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error(path.string() + ": truncated chain header");
  ChainHeader h;
  h.meta = meta_from_json(json::parse(text));
  h.header_bytes = 8 + static_cast<std::int64_t>(sizeof(len)) +
                   static_cast<std::int64_t>(len);
  return h;
}

std::string header_bytes(const ChainMeta& meta) {
  const std::string text = meta_to_json(meta).dump();
  std::string out(kChainMagic, 8);
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out.append(text);
  return out;
}

}  // namespace

ChainWriter::ChainWriter(const fs::path& path, const ChainMeta& meta,
                         bool append_mode)
    : path_(path), meta_(meta) {
  record_len_ = ChainLayout::from_meta(meta).record_len;
  const std::string header = header_bytes(meta);
  header_bytes_ = static_cast<std::int64_t>(header.size());
  if (append_mode && fs::exists(path)) {
    const std::int64_t bytes = static_cast<std::int64_t>(fs::file_size(path));
    records_ = (bytes - header_bytes_) / (record_len_ * 8);
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) throw std::runtime_error("cannot append to " + path.string());
    return;
  }
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  out_.write(header.data(), static_cast<std::streamsize>(header.size()));
}

void ChainWriter::append(std::span<const double> record) {
  if (static_cast<std::int64_t>(record.size()) != record_len_)
    throw std::invalid_argument("ChainWriter: record length mismatch");
  write_doubles(out_, record);
  if (!out_) throw std::runtime_error("chain write failed: " + path_.string());
  ++records_;
}

void ChainWriter::flush() { out_.flush(); }

void write_chain(const fs::path& path, const ChainStore& chain) {
  ChainWriter w(path, chain.meta(), false);
  for (int s = 0; s < chain.iterations_recorded(); ++s) w.append(chain.record(s));
  w.flush();
}

ChainMeta read_chain_meta(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open chain " + path.string());
  return read_chain_header(in, path).meta;
}

ChainStore read_chain(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open chain " + path.string());
  const ChainHeader h = read_chain_header(in, path);
  ChainStore chain(h.meta);
  const std::int64_t record_len = chain.layout().record_len;
  const std::int64_t bytes = static_cast<std::int64_t>(fs::file_size(path)) -
                             h.header_bytes;
  if (bytes % (record_len * 8) != 0)
    throw std::runtime_error(path.string() + ": trailing partial record");
  const std::int64_t records = bytes / (record_len * 8);
  std::vector<double> rec(record_len);
  for (std::int64_t s = 0; s < records; ++s) {
    in.read(reinterpret_cast<char*>(rec.data()),
            static_cast<std::streamsize>(record_len * 8));
    if (!in) throw std::runtime_error(path.string() + ": truncated records");
    chain.append(rec, 0.0);
  }
  // timing sidecar is optional
  const fs::path timing = path.string() + ".timing.csv";
  if (fs::exists(timing)) {
    std::vector<double> secs = read_timing(timing);
    for (std::size_t s = 0; s < secs.size() && s < chain.wall_seconds().size(); ++s)
      chain.wall_seconds()[s] = secs[s];
  }
  return chain;
}

void truncate_chain(const fs::path& path, std::int64_t records) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open chain " + path.string());
  const ChainHeader h = read_chain_header(in, path);
  in.close();
  const std::int64_t record_len = ChainLayout::from_meta(h.meta).record_len;
  fs::resize_file(path, static_cast<std::uintmax_t>(h.header_bytes +
                                                    records * record_len * 8));
}

void write_timing(const fs::path& path, const std::vector<double>& seconds,
                  bool append_mode) {
  // iteration indices continue from whatever is already present
  std::int64_t start = 0;
  if (append_mode && fs::exists(path)) {
    std::ifstream in(path);
    std::string line;
    std::int64_t lines = 0;
    while (std::getline(in, line)) ++lines;
    start = std::max<std::int64_t>(0, lines - 1);
  } else {
    append_mode = false;
  }
  std::ofstream out(path, append_mode ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write timing " + path.string());
  if (!append_mode) out << "iteration,seconds\n";
  out.precision(9);
  for (std::size_t i = 0; i < seconds.size(); ++i)
    out << (start + static_cast<std::int64_t>(i)) << ',' << seconds[i] << '\n';
}

std::vector<double> read_timing(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open timing " + path.string());
  std::vector<double> secs;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    secs.push_back(std::stod(line.substr(comma + 1)));
  }
  return secs;
}

void save_checkpoint(const fs::path& path, const SamplerState& st) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(kStateMagic, 8);
    st.save(out);
    if (!out) throw std::runtime_error("checkpoint write failed");
  }
  fs::rename(tmp, path);
}

SamplerState load_checkpoint(const fs::path& path, const Dataset& ds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kStateMagic, 8) != 0)
    throw std::runtime_error(path.string() + ": not a checkpoint file");
  return SamplerState::load(in, ds);
}

// --- results ---

namespace {
std::string csv_number(double v) {
  if (std::isnan(v)) return "NA";
  std::ostringstream ss;
  ss.precision(10);
  ss << v;
  return ss.str();
}
}  // namespace

void write_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "rank,log_dic,rmse_b,auc,ci_length,ci_coverage,wall_hours\n";
  for (const auto& r : rows)
    out << r.label << ',' << csv_number(r.log_dic) << ',' << csv_number(r.rmse_b)
        << ',' << csv_number(r.auc) << ',' << csv_number(r.ci_length) << ','
        << csv_number(r.ci_coverage) << ',' << csv_number(r.wall_hours) << '\n';
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<MetricsRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7)
      throw std::runtime_error(path.string() + ": malformed metrics row");
    MetricsRow r;
    r.label = cells[0];
    auto num = [](const std::string& s) {
      return s == "NA" ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
    };
    r.log_dic = num(cells[1]);
    r.rmse_b = num(cells[2]);
    r.auc = num(cells[3]);
    r.ci_length = num(cells[4]);
    r.ci_coverage = num(cells[5]);
    r.wall_hours = num(cells[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_selection_json(const fs::path& path, const PosteriorSummary& summary,
                          const std::string& model_label) {
  json j;
  j["model"] = model_label;
  j["signal_count"] = summary.signal_count;
  json regions = json::array();
  for (std::size_t g = 0; g < summary.b_selected.size(); ++g) {
    json reg;
    reg["dims"] = summary.b_selected[g].dims();
    json cells = json::array();
    for (std::int64_t v = 0; v < summary.b_selected[g].size(); ++v)
      if (summary.b_selected[g][v] != 0.0)
        cells.push_back({{"index", v}, {"value", summary.b_selected[g][v]}});
    reg["active_cells"] = cells;
    regions.push_back(reg);
  }
  j["activation"] = regions;

  const auto& pc = summary.connectivity.partial_corr;
  std::vector<std::vector<double>> pc_rows(pc.rows(), std::vector<double>(pc.cols()));
  for (Eigen::Index a = 0; a < pc.rows(); ++a)
    for (Eigen::Index b = 0; b < pc.cols(); ++b) pc_rows[a][b] = pc(a, b);
  j["partial_correlation"] = pc_rows;
  json pairs = json::array();
  for (const auto& [a, b] : summary.connectivity.connected)
    pairs.push_back({{"a", a}, {"b", b}, {"partial_correlation", pc(a, b)}});
  j["connected_pairs"] = pairs;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Eigen::MatrixXd middle_slice(const DenseTensor& t) {
  const auto& dims = t.dims();
  const int D = t.order();
  if (D == 1) {
    Eigen::MatrixXd m(1, dims[0]);
    for (int i = 0; i < dims[0]; ++i) m(0, i) = t[i];
    return m;
  }
  std::vector<int> idx(D, 0);
  for (int j = 2; j < D; ++j) idx[j] = dims[j] / 2;
  Eigen::MatrixXd m(dims[0], dims[1]);
  for (int a = 0; a < dims[0]; ++a)
    for (int b = 0; b < dims[1]; ++b) {
      idx[0] = a;
      idx[1] = b;
      m(a, b) = t.at(idx);
    }
  return m;
}

void write_svg_heatmap(const fs::path& path, const Eigen::MatrixXd& values,
                       const std::string& title) {
  const int rows = static_cast<int>(values.rows());
  const int cols = static_cast<int>(values.cols());
  const int cell = 14, margin = 6, header = 22;
  const int width = cols * cell + 2 * margin;
  const int height = rows * cell + 2 * margin + header;
  double vmax = 1e-12;
  for (int a = 0; a < rows; ++a)
    for (int b = 0; b < cols; ++b) vmax = std::max(vmax, std::abs(values(a, b)));

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
      << height << "'>\n";
  out << "<text x='" << margin << "' y='16' font-size='12' font-family='sans-serif'>"
      << title << "</text>\n";
  for (int a = 0; a < rows; ++a)
    for (int b = 0; b < cols; ++b) {
      const double z = values(a, b) / vmax;  // [-1, 1]
      // blue (negative) .. white (zero) .. red (positive)
      const int r = static_cast<int>(255 * (z >= 0 ? 1.0 : 1.0 + z));
      const int g = static_cast<int>(255 * (1.0 - std::abs(z)));
      const int bch = static_cast<int>(255 * (z <= 0 ? 1.0 : 1.0 - z));
      out << "<rect x='" << margin + b * cell << "' y='" << header + margin + a * cell
          << "' width='" << cell << "' height='" << cell << "' fill='rgb(" << r << ','
          << g << ',' << bch << ")'/>\n";
    }
  out << "</svg>\n";
}

}  // namespace btac::io
