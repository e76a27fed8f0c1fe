#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "mtvgp/chain_io.hpp"
#include "mtvgp/config.hpp"
#include "mtvgp/dataset.hpp"
#include "mtvgp/errors.hpp"
#include "mtvgp/fileio.hpp"
#include "test_support.hpp"

using namespace mtvgp;

namespace {

DatasetSchema schema(std::vector<ResponseColumn> r) {
  DatasetSchema s;
  s.responses = std::move(r);
  return s;
}

}  // namespace

TEST_CASE("minimal three-row file") {
  const SpatialDataset d =
      parse_dataset("lon,lat,y\n0,0,1.5\n1,0,2\n0,1,-0.3\n", schema({{"y", {FamilyKind::kGaussian}, ""}}));
  CHECK(d.n() == 3);
  CHECK(d.p() == 1);
  CHECK(d.q() == 1);
  CHECK(d.covariate_names == std::vector<std::string>{"intercept"});
  CHECK(d.y(2, 0) == -0.3);
}

TEST_CASE("negative Poisson count names row and column") {
  try {
    parse_dataset("lon,lat,cnt\n0,0,1\n1,0,-2\n", schema({{"cnt", {FamilyKind::kPoisson}, ""}}));
    FAIL("expected a data error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cnt") != std::string::npos);
    CHECK(msg.find("row 2") != std::string::npos);
  }
}

TEST_CASE("wildfire-shaped file") {
  const std::string csv =
      "# monthly aggregates\nlon,lat,log1p_BA,CNT\n-120.5,38.1,0.0,0\n-119.2,37.4,2.31,3\n-118.9,36.0,NA,1\n"
      "-121.3,39.7,5.02,12\n";
  const SpatialDataset d = parse_dataset(csv, schema({{"log1p_BA", {FamilyKind::kGaussian}, ""},
                                                      {"CNT", {FamilyKind::kPoisson}, ""}}));
  CHECK(d.n() == 4);
  CHECK(d.q() == 2);
  CHECK(d.p() == 1);
  CHECK(d.response_names == std::vector<std::string>{"log1p_BA", "CNT"});
  CHECK(std::isnan(d.y(2, 0)));
  CHECK(d.y(3, 1) == 12.0);
  CHECK(d.model.families[1].kind == FamilyKind::kPoisson);
}

TEST_CASE("covariates, trials and CSV round trip") {
  DatasetSchema s = schema({{"k", {FamilyKind::kBinomial, 1.0, 1}, "k_trials"}});
  const std::string csv = "lon,lat,elev,k,k_trials\n0,0,1.0,2,5\n1,0,2.0,0,3\n0,1,0.5,4,4\n1,1,0.1,1,2\n";
  const SpatialDataset d = parse_dataset(csv, s);
  CHECK(d.p() == 2);
  CHECK(d.covariate_names == std::vector<std::string>{"intercept", "elev"});
  CHECK(d.model.trials_at(1, 0) == 3);
  const SpatialDataset back = parse_dataset(dataset_to_csv(d, {"note"}), s);
  CHECK(back.x == d.x);
  CHECK(back.y == d.y);
  CHECK(back.model.trials == d.model.trials);
  CHECK_THROWS_AS(parse_dataset("lon,lat,elev,k,k_trials\n0,0,1,6,5\n1,1,1,0,1\n", s), DataError);
}

TEST_CASE("malformed input") {
  const DatasetSchema s = schema({{"y", {FamilyKind::kGaussian}, ""}});
  CHECK_THROWS_AS(parse_dataset("x,y,z\n0,0,1\n", s), DataError);
  CHECK_THROWS_AS(parse_dataset("lon,lat,y\n0,0,1\n0,0,2\n", s), DataError);
  CHECK_THROWS_AS(parse_dataset("lon,lat,y\n0,zero,1\n", s), DataError);
  CHECK_THROWS_AS(parse_dataset("lon,lat\n0,0\n", s), DataError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.csv", s), DataError);
}

TEST_CASE("rank-deficient covariates are rejected") {
  DatasetSchema s = schema({{"y", {FamilyKind::kGaussian}, ""}});
  const SpatialDataset d = parse_dataset("lon,lat,a,y\n0,0,1,1\n1,0,1,2\n0,1,1,3\n", s);
  CHECK_THROWS_AS(d.require_full_rank(), DataError);
  const SpatialDataset tiny = parse_dataset("lon,lat,a,y\n0,0,1,1\n1,0,2,2\n", s);
  CHECK_THROWS_AS(tiny.require_full_rank(), DataError);
}

TEST_CASE("config round trip and validation") {
  const std::string text = R"({
    "data": {"path": "train.csv", "responses": [{"name": "a", "family": "gaussian", "psi": 0.5},
                                                {"name": "b", "family": "bernoulli"}]},
    "prior": {"V": 10, "S": [[1, 0.2], [0.2, 2]], "v": 5, "correlation_threshold": 0.01},
    "nu": 0.3,
    "mcmc": {"iterations": 300, "burn_in": 100, "thin": 2, "m": 7},
    "chains": 2, "seed": 17, "output": {"dir": "runs/x"}, "predict": {"level": 0.9},
    "simulation": {"n": 50, "phi0": 0.5, "Sigma0": [[2, 0], [0, 1]]}
  })";
  const RunConfig c = parse_config(text);
  CHECK(c.data.responses[0].family.psi == 0.5);
  CHECK(c.data.responses[1].family.kind == FamilyKind::kBernoulli);
  CHECK(c.nu == 0.3);
  CHECK(c.mcmc.m == 7);
  CHECK(c.chains == 2);
  CHECK(c.out_dir == "runs/x");
  const std::string canon = config_to_json(c);
  CHECK(config_to_json(parse_config(canon)) == canon);
  CHECK(config_hash(parse_config(canon)) == config_hash(c));
  RunConfig d = c;
  d.seed = 18;
  CHECK(config_hash(d) != config_hash(c));
  CHECK(config_to_json(parse_config(config_to_json(RunConfig()))) == config_to_json(RunConfig()));
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK_THROWS_AS(parse_config(R"({"mcmc": {"iters": 10}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"colour": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"nu": "half"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"nu": -1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"data": {"responses": [{"name": "a", "family": "weibull"}]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
}

TEST_CASE("prior resolution") {
  RunConfig c;
  const SpatialDataset d = parse_dataset("lon,lat,y1,y2\n0,0,1,1\n1,0,2,0\n0,1,3,2\n1,1,0,4\n", dataset_schema(c));
  const PriorSpec p = resolve_prior(c, d);
  CHECK(p.dof == 3.0);
  CHECK(p.v == 100.0 * Eigen::MatrixXd::Identity(1, 1));
  CHECK(p.b_phi == doctest::Approx(range_for_correlation(std::sqrt(2.0), 0.5, 0.05)));
}

TEST_CASE("chain serialization round trip") {
  PosteriorChain c;
  c.n = 3;
  c.p = 2;
  c.q = 2;
  Rng rng(1);
  for (int l = 0; l < 4; ++l) {
    c.phi.push_back(0.1 * (l + 1));
    c.b.push_back(standard_normal_matrix(2, 2, rng));
    c.sigma.push_back(Eigen::MatrixXd::Identity(2, 2) * (l + 1));
    c.w.push_back(standard_normal_matrix(3, 2, rng));
    c.chain_id.push_back(l / 2);
  }
  c.stats.phi_proposals = 10;
  c.stats.phi_accepts = 4;
  c.constrained = {1};
  const ChainProvenance prov{"0123456789abcdef", 77};
  const std::string bytes = serialize_chain(c, prov);
  CHECK(bytes.substr(0, 8) == "MTVGPCHN");
  ChainProvenance back_prov;
  const PosteriorChain back = deserialize_chain(bytes, &back_prov);
  CHECK(back_prov.config_hash == prov.config_hash);
  CHECK(back_prov.seed == 77);
  CHECK(back.phi == c.phi);
  CHECK(back.chain_id == c.chain_id);
  CHECK(back.constrained == c.constrained);
  CHECK(back.stats.phi_accepts == 4);
  for (int l = 0; l < 4; ++l) {
    CHECK(back.b[l] == c.b[l]);
    CHECK(back.sigma[l] == c.sigma[l]);
    CHECK(back.w[l] == c.w[l]);
  }
  CHECK_THROWS_AS(deserialize_chain(bytes.substr(0, bytes.size() - 3)), DataError);
  CHECK_THROWS_AS(deserialize_chain("MTVGPXXX" + bytes.substr(8)), DataError);

  const auto dir = std::filesystem::temp_directory_path() / "mtvgp_io_test";
  std::filesystem::remove_all(dir);
  write_chain((dir / "c.bin").string(), c, prov);
  CHECK(read_chain((dir / "c.bin").string()).phi == c.phi);
  CHECK_FALSE(std::filesystem::exists(dir / "c.bin.tmp"));
  const std::string summary = chain_summary_json(c, prov);
  CHECK(summary.find("config_hash") != std::string::npos);
  CHECK(summary.find("\"ess\"") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("atomic writes create parent directories") {
  const auto dir = std::filesystem::temp_directory_path() / "mtvgp_atomic" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  atomic_write_file((dir / "f.txt").string(), "hello");
  CHECK(read_file((dir / "f.txt").string()) == "hello");
  CHECK_THROWS_AS(read_file((dir / "missing").string()), DataError);
  std::filesystem::remove_all(dir.parent_path());
}
