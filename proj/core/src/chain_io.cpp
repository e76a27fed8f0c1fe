#include "mtvgp/chain_io.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "mtvgp/errors.hpp"
#include "mtvgp/fileio.hpp"

namespace mtvgp {

using json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'M', 'T', 'V', 'G', 'P', 'C', 'H', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void append(std::string& out, const T& v) {
  static_assert(std::endian::native == std::endian::little);
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void append_matrix(std::string& out, const Eigen::MatrixXd& m) {
  out.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <typename T>
  T get() {
    T v{};
    take(&v, sizeof(T));
    return v;
  }
  void take(void* dst, std::size_t bytes) {
    if (pos_ + bytes > s_.size()) throw DataError("chain file is truncated");
    std::memcpy(dst, s_.data() + pos_, bytes);
    pos_ += bytes;
  }
  Eigen::MatrixXd matrix(Index rows, Index cols) {
    Eigen::MatrixXd m(rows, cols);
    take(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    return m;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

json stats_json(const ChainStats& s) {
  return {{"iterations", s.iterations},       {"burn_in", s.burn_in},
          {"thin", s.thin},                   {"phi_proposals", s.phi_proposals},
          {"phi_accepts", s.phi_accepts},     {"phi_build_failures", s.phi_build_failures},
          {"proposal_sd", s.proposal_sd},     {"ess_sweeps", s.ess_sweeps},
          {"ess_shrinks", s.ess_shrinks},     {"ess_stalls", s.ess_stalls}};
}

json interval_summary(const std::vector<double>& v) {
  if (v.empty()) return {{"mean", nullptr}};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  return {{"mean", mean},
          {"q025", quantile(v, 0.025)},
          {"q975", quantile(v, 0.975)},
          {"ess", effective_sample_size(v)}};
}

}  // namespace

std::string serialize_chain(const PosteriorChain& c, const ChainProvenance& prov) {
  const auto d = static_cast<long long>(c.size());
  json fields = json::array();
  fields.push_back({{"name", "phi"}, {"shape", {d}}});
  fields.push_back({{"name", "B"}, {"shape", {d, c.p, c.q}}});
  fields.push_back({{"name", "Sigma"}, {"shape", {d, c.q, c.q}}});
  if (c.has_w()) fields.push_back({{"name", "W"}, {"shape", {d, c.n, c.q}}});
  fields.push_back({{"name", "chain_id"}, {"shape", {d}}});
  const json header = {{"format", "mtvgp-chain"},
                       {"n", c.n},
                       {"p", c.p},
                       {"q", c.q},
                       {"draws", d},
                       {"dtype", "float64"},
                       {"endianness", "little"},
                       {"matrix_order", "column-major"},
                       {"fields", fields},
                       {"constrained", c.constrained},
                       {"config_hash", prov.config_hash},
                       {"seed", prov.seed},
                       {"stats", stats_json(c.stats)}};
  const std::string h = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  append(out, kVersion);
  append(out, static_cast<std::uint64_t>(h.size()));
  out += h;
  for (double v : c.phi) append(out, v);
  for (const auto& m : c.b) append_matrix(out, m);
  for (const auto& m : c.sigma) append_matrix(out, m);
  for (const auto& m : c.w) append_matrix(out, m);
  for (int id : c.chain_id) append(out, static_cast<double>(id));
  return out;
}

PosteriorChain deserialize_chain(const std::string& bytes, ChainProvenance* prov) {
  Reader r(bytes);
  char magic[8];
  r.take(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw DataError("not a chain file");
  if (r.get<std::uint32_t>() != kVersion) throw DataError("unsupported chain file version");
  const auto hlen = r.get<std::uint64_t>();
  if (hlen > bytes.size()) throw DataError("chain file is truncated");
  std::string htext(static_cast<std::size_t>(hlen), '\0');
  r.take(htext.data(), htext.size());
  json header;
  try {
    header = json::parse(htext);
  } catch (const json::exception&) {
    throw DataError("chain header is not valid JSON");
  }
  PosteriorChain c;
  try {
    c.n = header.at("n").get<Index>();
    c.p = header.at("p").get<Index>();
    c.q = header.at("q").get<Index>();
    const auto d = header.at("draws").get<std::size_t>();
    bool has_w = false;
    for (const auto& f : header.at("fields")) has_w = has_w || f.at("name") == "W";
    c.constrained = header.at("constrained").get<std::vector<int>>();
    const json& s = header.at("stats");
    c.stats.iterations = s.at("iterations");
    c.stats.burn_in = s.at("burn_in");
    c.stats.thin = s.at("thin");
    c.stats.phi_proposals = s.at("phi_proposals");
    c.stats.phi_accepts = s.at("phi_accepts");
    c.stats.phi_build_failures = s.at("phi_build_failures");
    c.stats.proposal_sd = s.at("proposal_sd");
    c.stats.ess_sweeps = s.at("ess_sweeps");
    c.stats.ess_shrinks = s.at("ess_shrinks");
    c.stats.ess_stalls = s.at("ess_stalls");
    if (prov) {
      prov->config_hash = header.at("config_hash").get<std::string>();
      prov->seed = header.at("seed").get<std::uint64_t>();
    }
    c.phi.resize(d);
    for (auto& v : c.phi) v = r.get<double>();
    for (std::size_t l = 0; l < d; ++l) c.b.push_back(r.matrix(c.p, c.q));
    for (std::size_t l = 0; l < d; ++l) c.sigma.push_back(r.matrix(c.q, c.q));
    if (has_w)
      for (std::size_t l = 0; l < d; ++l) c.w.push_back(r.matrix(c.n, c.q));
    for (std::size_t l = 0; l < d; ++l) c.chain_id.push_back(static_cast<int>(r.get<double>()));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed chain header: ") + e.what());
  }
  if (!r.done()) throw DataError("chain file has trailing bytes");
  return c;
}

void write_chain(const std::string& path, const PosteriorChain& chain, const ChainProvenance& provenance) {
  atomic_write_file(path, serialize_chain(chain, provenance));
}

PosteriorChain read_chain(const std::string& path, ChainProvenance* provenance) {
  return deserialize_chain(read_file(path), provenance);
}

std::string chain_summary_json(const PosteriorChain& c, const ChainProvenance& prov,
                               const std::vector<std::string>& covariate_names,
                               const std::vector<std::string>& response_names) {
  const auto cov_name = [&](Index i) {
    return static_cast<std::size_t>(i) < covariate_names.size() ? covariate_names[static_cast<std::size_t>(i)]
                                                                 : "x" + std::to_string(i + 1);
  };
  const auto resp_name = [&](Index j) {
    return static_cast<std::size_t>(j) < response_names.size() ? response_names[static_cast<std::size_t>(j)]
                                                                : "y" + std::to_string(j + 1);
  };
  json out;
  out["config_hash"] = prov.config_hash;
  out["seed"] = prov.seed;
  out["draws"] = c.size();
  out["phi_acceptance_rate"] = c.stats.phi_acceptance();
  out["stats"] = stats_json(c.stats);
  out["constrained_responses"] = c.constrained;
  out["phi"] = interval_summary(c.phi);
  json b = json::object();
  std::vector<double> buf(c.size());
  for (Index i = 0; i < c.p; ++i)
    for (Index j = 0; j < c.q; ++j) {
      for (std::size_t l = 0; l < c.size(); ++l) buf[l] = c.b[l](i, j);
      b[cov_name(i) + ":" + resp_name(j)] = interval_summary(buf);
    }
  out["B"] = b;
  json s = json::object();
  for (Index i = 0; i < c.q; ++i)
    for (Index j = i; j < c.q; ++j) {
      for (std::size_t l = 0; l < c.size(); ++l) buf[l] = c.sigma[l](i, j);
      s[resp_name(i) + ":" + resp_name(j)] = interval_summary(buf);
    }
  out["Sigma"] = s;
  return out.dump(2) + "\n";
}

}  // namespace mtvgp
