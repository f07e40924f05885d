#include "ckg/pseudo_coords.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ckg/error.hpp"

namespace ckg {

std::string to_string(PEKind kind) {
  switch (kind) {
    case PEKind::RRWP: return "rrwp";
    case PEKind::SPD: return "spd";
    case PEKind::RD: return "rd";
  }
  return "rrwp";
}

PEKind pe_kind_from_string(const std::string& s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "rrwp") return PEKind::RRWP;
  if (lower == "spd") return PEKind::SPD;
  if (lower == "rd") return PEKind::RD;
  throw Error(ErrorCode::InvalidArgument, "unknown pseudo-coordinate kind '" + s + "'");
}

PseudoCoordinateField::PseudoCoordinateField(std::size_t n, std::size_t k, PEKind kind,
                                             bool rescaled)
    : n_(n), k_(k), kind_(kind), rescaled_(rescaled), values_(n * n * k, 0.0) {}

DenseMatrix PseudoCoordinateField::channel(std::size_t t) const {
  DenseMatrix m(n_, n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = at(i, j)[t];
  return m;
}

void PseudoCoordinateField::exclude(std::size_t i, std::size_t j) {
  if (mask_.empty()) mask_.assign(n_ * n_, false);
  mask_[i * n_ + j] = true;
}

void PseudoCoordinateField::standardize() {
  const double count = static_cast<double>(n_ * n_);
  for (std::size_t t = 0; t < k_; ++t) {
    double mean = 0.0;
    for (std::size_t p = 0; p < n_ * n_; ++p) mean += values_[p * k_ + t];
    mean /= count;
    double var = 0.0;
    for (std::size_t p = 0; p < n_ * n_; ++p) {
      const double c = values_[p * k_ + t] - mean;
      var += c * c;
    }
    var /= count;
    const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    for (std::size_t p = 0; p < n_ * n_; ++p)
      values_[p * k_ + t] = (values_[p * k_ + t] - mean) * scale;
  }
}

nlohmann::json PseudoCoordinateField::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind_);
  j["k"] = k_;
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < n_; ++i) {
    auto row = nlohmann::json::array();
    for (std::size_t jj = 0; jj < n_; ++jj) {
      const auto v = at(i, jj);
      row.push_back(std::vector<double>(v.begin(), v.end()));
    }
    rows.push_back(std::move(row));
  }
  j["values"] = std::move(rows);
  return j;
}

PseudoCoordinateField rrwp(const Graph& g, std::size_t k, bool rescale) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "RRWP needs k >= 1");
  const auto n = g.num_nodes();
  const auto powers = matrix_power_sequence(random_walk_matrix(g), k);
  PseudoCoordinateField field(n, k, PEKind::RRWP, rescale);
  const double scale = rescale ? static_cast<double>(n) : 1.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      auto p = field.at(i, j);
      for (std::size_t t = 0; t < k; ++t)
        p[t] = scale * powers[t](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  return field;
}

PseudoCoordinateField spd_field(const Graph& g) {
  const auto n = g.num_nodes();
  const auto spd = shortest_path_distances(g);
  PseudoCoordinateField field(n, 1, PEKind::SPD, false);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = spd(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (d == kUnreachable) {
        field.exclude(i, j);
        field.at(i, j)[0] = 0.0;
      } else {
        field.at(i, j)[0] = d;
      }
    }
  return field;
}

PseudoCoordinateField rd_field(const Graph& g) {
  const auto n = g.num_nodes();
  const auto rd = resistance_distance(g);
  PseudoCoordinateField field(n, 1, PEKind::RD, false);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      field.at(i, j)[0] = rd(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return field;
}

SupportSpec make_support(const Graph& g, SupportMode mode, const PseudoCoordinateField* field) {
  SupportSpec spec{mode, {}};
  const auto n = g.num_nodes();
  if (mode.kind == SupportMode::Kind::Global) {
    spec.sets.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) spec.sets[i].push_back(j);
  } else {
    spec.sets = k_hop_support(g, mode.hops);
  }
  if (field != nullptr) {
    for (std::size_t i = 0; i < n; ++i)
      std::erase_if(spec.sets[i], [&](std::size_t j) { return field->excluded(i, j); });
  }
  return spec;
}

}  // namespace ckg
