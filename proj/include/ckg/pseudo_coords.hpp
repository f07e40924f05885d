#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ckg/graph.hpp"

namespace ckg {

enum class PEKind { RRWP, SPD, RD };

std::string to_string(PEKind kind);
PEKind pe_kind_from_string(const std::string& s);

/// Relative encoding P(i, j) in R^k for every ordered node pair. The
/// diagonal P(i, i) doubles as the absolute encoding of node i.
class PseudoCoordinateField {
 public:
  PseudoCoordinateField(std::size_t n, std::size_t k, PEKind kind, bool rescaled);

  std::size_t num_nodes() const { return n_; }
  std::size_t width() const { return k_; }
  PEKind kind() const { return kind_; }
  bool rescaled() const { return rescaled_; }

  std::span<double> at(std::size_t i, std::size_t j) {
    return {values_.data() + (i * n_ + j) * k_, k_};
  }
  std::span<const double> at(std::size_t i, std::size_t j) const {
    return {values_.data() + (i * n_ + j) * k_, k_};
  }
  /// Channel t of every pair as an n x n matrix.
  DenseMatrix channel(std::size_t t) const;
  /// Pairs (i, j) that are excluded from every support (unreachable under SPD).
  bool excluded(std::size_t i, std::size_t j) const { return !mask_.empty() && mask_[i * n_ + j]; }
  void exclude(std::size_t i, std::size_t j);

  /// Whole-field standardization per channel over all n^2 pairs (zero mean,
  /// unit variance). Channels with zero variance are only centered.
  void standardize();

  nlohmann::json to_json() const;

 private:
  std::size_t n_;
  std::size_t k_;
  PEKind kind_;
  bool rescaled_;
  std::vector<double> values_;
  std::vector<bool> mask_;
};

PseudoCoordinateField rrwp(const Graph& g, std::size_t k, bool rescale);
PseudoCoordinateField spd_field(const Graph& g);
PseudoCoordinateField rd_field(const Graph& g);

struct SupportMode {
  enum class Kind { Global, KHop } kind = Kind::Global;
  std::size_t hops = 0;

  static SupportMode global() { return {Kind::Global, 0}; }
  static SupportMode k_hop(std::size_t k) { return {Kind::KHop, k}; }
};

struct SupportSpec {
  SupportMode mode;
  std::vector<std::vector<std::size_t>> sets;  // sorted, each contains its own node
};

/// When `field` is given, pairs it excludes are dropped from the supports.
SupportSpec make_support(const Graph& g, SupportMode mode,
                         const PseudoCoordinateField* field = nullptr);

}  // namespace ckg
