#pragma once

#include <string>
#include <vector>

#include "mtvgp/mcmc.hpp"

namespace mtvgp {

/// Provenance stored with every chain file.
struct ChainProvenance {
  std::string config_hash;
  std::uint64_t seed = 0;
};

/// Chain file layout (all little-endian):
///   8 bytes  magic "MTVGPCHN"
///   uint32   format version
///   uint64   header length H
///   H bytes  JSON header (dimensions, draw count, field list, provenance, stats)
///   fields   float64 columns in header order: phi[D], B[D*p*q], Sigma[D*q*q],
///            W[D*n*q] when stored, chain_id[D]; matrices column-major per draw.
std::string serialize_chain(const PosteriorChain& chain, const ChainProvenance& provenance);
PosteriorChain deserialize_chain(const std::string& bytes, ChainProvenance* provenance = nullptr);

void write_chain(const std::string& path, const PosteriorChain& chain, const ChainProvenance& provenance);
PosteriorChain read_chain(const std::string& path, ChainProvenance* provenance = nullptr);

/// Human-readable JSON: posterior means, 95% intervals and effective sample
/// sizes for phi, B and Sigma, plus acceptance statistics.
std::string chain_summary_json(const PosteriorChain& chain, const ChainProvenance& provenance,
                               const std::vector<std::string>& covariate_names = {},
                               const std::vector<std::string>& response_names = {});

}  // namespace mtvgp
